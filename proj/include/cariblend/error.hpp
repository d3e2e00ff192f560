// Copyright 2026 The cariblend Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cariblend {

enum class ErrorCode {
    DimensionMismatch,
    DegenerateFace,
    TopologyMismatch,
    RankDeficient,
    SingularSystem,
    SolverFailure,
    InvalidArgument,
    Io,
    Parse,
};

inline const char* to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DegenerateFace: return "DegenerateFace";
    case ErrorCode::TopologyMismatch: return "TopologyMismatch";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::SolverFailure: return "SolverFailure";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Parse: return "Parse";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }

    /// I/O and parse failures are reported separately from numerical ones by the CLI.
    bool is_io() const noexcept { return code_ == ErrorCode::Io || code_ == ErrorCode::Parse; }

private:
    ErrorCode code_;
};

/// Non-fatal diagnostics collected by operations that accept an optional sink.
using Warnings = std::vector<std::string>;

inline void warn(Warnings* sink, std::string message)
{
    if (sink != nullptr) {
        sink->push_back(std::move(message));
    }
}

} // namespace cariblend
