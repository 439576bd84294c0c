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

#include "headfit/camera.hpp"
#include "headfit/fitter.hpp"
#include "headfit/types.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace headfit {

inline constexpr int kAnnotationSchemaVersion = 1;

enum class PoseClass { Front, Side, Atypical };
enum class ExpressionClass { Neutral, NonNeutral };
enum class Gender { Female, Male, Undefined };
enum class AgeGroup { Child, Young, Middle, Senior };
enum class ImageQuality { High, Low };
enum class Illumination { Standard, NonStandard };

/// Per-image attribute labels. Fields are empty until an operator fills them in.
struct AttributeCard
{
    std::optional<PoseClass> pose;
    std::optional<ExpressionClass> expression;
    std::optional<bool> occlusion;
    std::optional<Gender> gender;
    std::optional<AgeGroup> age_group;
    std::optional<ImageQuality> quality;
    std::optional<Illumination> illumination;
};

/// Canonical attribute keys: pose, expression, occlusion, gender, age,
/// quality, lighting. "age_group" and "illumination" are accepted as aliases.
const std::vector<std::string>& attribute_keys();
bool is_attribute_key(std::string_view key);

/// Maps an alias onto its canonical key. Throws InvalidArgument on an unknown key.
std::string canonical_attribute_key(std::string_view key);

/// Allowed string values of one attribute.
const std::vector<std::string>& attribute_values(std::string_view key);

/// String form of one attribute ("front", "non-neutral", "true", ...), or
/// nothing when unset. Throws InvalidArgument on an unknown key.
std::optional<std::string> attribute_value(const AttributeCard& card, std::string_view key);

/// Parses the string form of one attribute into `card`. Throws
/// InvalidArgument on an unknown key or value.
void set_attribute(AttributeCard& card, std::string_view key, std::string_view value);

/// One dataset record: fitted vertices in model units plus the matrices that
/// map them onto the image, the head box and the attribute card.
struct Annotation
{
    int schema_version = kAnnotationSchemaVersion;
    std::string model_id;
    std::string image_ref;
    ImageSize image_size;
    Vertices vertices;
    ProjectionMatrices matrices;
    BBox bbox;
    AttributeCard attributes;
    /// Camera model the vertices were fitted under.
    std::string projection = "orthographic";
    /// Optional 7 x 3 alignment keypoints, for predictions that do not share
    /// the model topology.
    std::optional<Vertices> keypoints;
    /// Optional 68 x 2 landmarks (px), for the same kind of predictions.
    std::optional<Points2D> landmarks2d;
    std::optional<FitResult> fit;
};

} // namespace headfit
