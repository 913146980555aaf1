/*
 * Copyright 2026 The fishfit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "fishfit/common.hpp"

namespace fishfit {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedFile: return "MalformedFile";
    case ErrorCode::InvalidTopology: return "InvalidTopology";
    case ErrorCode::MissingAnnotation: return "MissingAnnotation";
    case ErrorCode::DegenerateFace: return "DegenerateFace";
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::SingularIntrinsics: return "SingularIntrinsics";
    case ErrorCode::DegeneratePlane: return "DegeneratePlane";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::MeshBehindCamera: return "MeshBehindCamera";
    case ErrorCode::EmptyUnion: return "EmptyUnion";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DegenerateMask: return "DegenerateMask";
    case ErrorCode::IsolatedVertex: return "IsolatedVertex";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::TargetEmpty: return "TargetEmpty";
    case ErrorCode::PointAtInfinity: return "PointAtInfinity";
    case ErrorCode::NearParallel: return "NearParallel";
    case ErrorCode::ZeroChord: return "ZeroChord";
    case ErrorCode::AllOutOfRange: return "AllOutOfRange";
    case ErrorCode::EdgeMismatch: return "EdgeMismatch";
    case ErrorCode::FishOutOfFrame: return "FishOutOfFrame";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

} // namespace fishfit
