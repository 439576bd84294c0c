/*
 * headfit - pin-based 3D head model fitting and evaluation.
 *
 * Copyright 2026 The headfit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace headfit {

enum class ErrorCode {
    DegenerateInput,
    DimensionMismatch,
    UnknownSubset,
    InvalidCounts,
    BehindCamera,
    DegenerateExtent,
    EmptyPins,
    SingularSystem,
    InvalidN,
    DegenerateConfiguration,
    NoFaces,
    TooFewAnnotators,
    MissingAttribute,
    ParseError,
    SchemaMismatch,
    ChecksumMismatch,
    IoError,
    UnknownModel,
    UnknownSession,
    UnknownPin,
    InvalidVertex,
    ConflictingRevision,
    InvalidArgument,
};

/// Stable machine-readable name, e.g. "DimensionMismatch".
std::string_view to_string(ErrorCode code);

/**
 * The single exception type thrown by the library. The code is part of the
 * public contract (it is what the service and CLI report); the message is
 * free-form.
 */
class Error : public std::runtime_error
{
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace headfit
