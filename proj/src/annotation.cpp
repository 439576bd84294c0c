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
#include "headfit/annotation.hpp"

#include "headfit/error.hpp"


namespace headfit {

namespace {

const std::vector<std::string> kPoseValues{"front", "side", "atypical"};
const std::vector<std::string> kExpressionValues{"neutral", "non-neutral"};
const std::vector<std::string> kOcclusionValues{"false", "true"};
const std::vector<std::string> kGenderValues{"female", "male", "undefined"};
const std::vector<std::string> kAgeValues{"child", "young", "middle", "senior"};
const std::vector<std::string> kQualityValues{"high", "low"};
const std::vector<std::string> kLightingValues{"standard", "non-standard"};

template <typename Enum>
std::optional<std::string> name_of(const std::optional<Enum>& value, const std::vector<std::string>& names)
{
    if (!value)
    {
        return std::nullopt;
    }
    return names.at(static_cast<std::size_t>(*value));
}

std::size_t index_of(std::string_view key, std::string_view value, const std::vector<std::string>& names)
{
    for (std::size_t i = 0; i < names.size(); ++i)
    {
        if (names[i] == value)
        {
            return i;
        }
    }
    throw Error(ErrorCode::InvalidArgument,
                "invalid value '" + std::string(value) + "' for attribute '" + std::string(key) + "'");
}

} // namespace

const std::vector<std::string>& attribute_keys()
{
    static const std::vector<std::string> keys{"pose", "expression", "occlusion", "gender",
                                               "age",  "quality",    "lighting"};
    return keys;
}

bool is_attribute_key(std::string_view key)
{
    if (key == "age_group" || key == "illumination")
    {
        return true;
    }
    for (const auto& k : attribute_keys())
    {
        if (k == key)
        {
            return true;
        }
    }
    return false;
}

std::string canonical_attribute_key(std::string_view key)
{
    if (key == "age_group")
    {
        return "age";
    }
    if (key == "illumination")
    {
        return "lighting";
    }
    if (!is_attribute_key(key))
    {
        throw Error(ErrorCode::InvalidArgument, "unknown attribute key '" + std::string(key) + "'");
    }
    return std::string(key);
}

const std::vector<std::string>& attribute_values(std::string_view key)
{
    const std::string k = canonical_attribute_key(key);
    if (k == "pose")
        return kPoseValues;
    if (k == "expression")
        return kExpressionValues;
    if (k == "occlusion")
        return kOcclusionValues;
    if (k == "gender")
        return kGenderValues;
    if (k == "age")
        return kAgeValues;
    if (k == "quality")
        return kQualityValues;
    return kLightingValues;
}

std::optional<std::string> attribute_value(const AttributeCard& card, std::string_view key)
{
    const std::string k = canonical_attribute_key(key);
    if (k == "pose")
        return name_of(card.pose, kPoseValues);
    if (k == "expression")
        return name_of(card.expression, kExpressionValues);
    if (k == "occlusion")
    {
        if (!card.occlusion)
            return std::nullopt;
        return *card.occlusion ? "true" : "false";
    }
    if (k == "gender")
        return name_of(card.gender, kGenderValues);
    if (k == "age")
        return name_of(card.age_group, kAgeValues);
    if (k == "quality")
        return name_of(card.quality, kQualityValues);
    return name_of(card.illumination, kLightingValues);
}

void set_attribute(AttributeCard& card, std::string_view key, std::string_view value)
{
    const std::string k = canonical_attribute_key(key);
    const std::size_t i = index_of(k, value, attribute_values(k));
    if (k == "pose")
        card.pose = static_cast<PoseClass>(i);
    else if (k == "expression")
        card.expression = static_cast<ExpressionClass>(i);
    else if (k == "occlusion")
        card.occlusion = i == 1;
    else if (k == "gender")
        card.gender = static_cast<Gender>(i);
    else if (k == "age")
        card.age_group = static_cast<AgeGroup>(i);
    else if (k == "quality")
        card.quality = static_cast<ImageQuality>(i);
    else
        card.illumination = static_cast<Illumination>(i);
}

} // namespace headfit
