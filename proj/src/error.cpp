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
#include "headfit/error.hpp"

namespace headfit {

std::string_view to_string(ErrorCode code)
{
    switch (code)
    {
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::UnknownSubset: return "UnknownSubset";
    case ErrorCode::InvalidCounts: return "InvalidCounts";
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::DegenerateExtent: return "DegenerateExtent";
    case ErrorCode::EmptyPins: return "EmptyPins";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::InvalidN: return "InvalidN";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::NoFaces: return "NoFaces";
    case ErrorCode::TooFewAnnotators: return "TooFewAnnotators";
    case ErrorCode::MissingAttribute: return "MissingAttribute";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::UnknownModel: return "UnknownModel";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::UnknownPin: return "UnknownPin";
    case ErrorCode::InvalidVertex: return "InvalidVertex";
    case ErrorCode::ConflictingRevision: return "ConflictingRevision";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

} // namespace headfit
