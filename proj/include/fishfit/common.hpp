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
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fishfit {

/// Millimeters per template unit. The model frame is the camera frame scaled
/// by this factor, so a fitted mesh needs no extra rotation to be expressed
/// in camera coordinates.
inline constexpr double kModelUnitMm = 1000.0;

enum class ErrorCode {
  MalformedFile,
  InvalidTopology,
  MissingAnnotation,
  DegenerateFace,
  BehindCamera,
  SingularIntrinsics,
  DegeneratePlane,
  DegenerateConfiguration,
  MeshBehindCamera,
  EmptyUnion,
  DimensionMismatch,
  DegenerateMask,
  IsolatedVertex,
  NonFiniteLoss,
  TargetEmpty,
  PointAtInfinity,
  NearParallel,
  ZeroChord,
  AllOutOfRange,
  EdgeMismatch,
  FishOutOfFrame,
  InvalidArgument,
  Io,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept {
    return code_;
  }

 private:
  ErrorCode code_;
};

#define FISHFIT_THROW_IF(cond, code, msg)  \
  do {                                     \
    if (cond) {                            \
      throw ::fishfit::Error((code), (msg)); \
    }                                      \
  } while (0)

} // namespace fishfit
