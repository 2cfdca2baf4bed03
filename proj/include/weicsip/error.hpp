// SPDX-License-Identifier: Apache-2.0
//
// weicsip: environment-aided CSI prediction with learned pilot patterns
// Copyright (C) 2026 The weicsip authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <stdexcept>
#include <string>

namespace weicsip {

/// Error categories shared by the C++ core and the C API.
enum class ErrorCode : int {
    ok = 0,
    invalid_argument = 1,
    shape_mismatch = 2,
    infeasible = 3,
    numerical = 4,
    io = 5,
    schema = 6,
    internal = 99,
};

/// Structured error. `field` names the offending dimension, parameter group
/// or config key when one applies.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string field, const std::string& message)
        : std::runtime_error(field.empty() ? message : field + ": " + message),
          code_(code),
          field_(std::move(field)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& field() const noexcept { return field_; }

private:
    ErrorCode code_;
    std::string field_;
};

inline void require(bool cond, ErrorCode code, const std::string& field, const std::string& message) {
    if (!cond) throw Error(code, field, message);
}

} // namespace weicsip
