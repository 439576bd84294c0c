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

#include "headfit/annotation.hpp"
#include "headfit/fitter.hpp"
#include "headfit/metrics.hpp"
#include "headfit/morphable.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace headfit {

/// Version of the binary model container and of every text schema.
inline constexpr int kFormatVersion = 1;

// Binary model container:
//   "HFMODEL\0", u32 version, u64 header length, JSON header (counts,
//   subsets, jaw joint), little-endian doubles (template, shape basis, expression
//   basis, jaw weights), u32 face indices, then a SHA-256 of all preceding bytes.

std::string encode_model(const HeadModel& model);
/// Throws ParseError (with byte offset), SchemaMismatch or ChecksumMismatch.
HeadModel decode_model(std::string_view bytes);
void save_model(const HeadModel& model, const std::filesystem::path& path);
HeadModel load_model(const std::filesystem::path& path);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);

// Text documents are JSON objects tagged with "schema" and "version".
// Readers throw SchemaMismatch naming the offending field.

/// Parses JSON text, throwing ParseError with line, column and byte offset.
nlohmann::json parse_json(std::string_view text, std::string_view source = "input");

/// Deterministic serialization: two-space indent, shortest round-trip numbers,
/// trailing newline.
std::string dump_json(const nlohmann::json& j);

nlohmann::json mesh_to_json(const Mesh& mesh);
Mesh mesh_from_json(const nlohmann::json& j);

/// Wavefront OBJ (vertices and triangular faces; polygons are fan-triangulated
/// on import).
std::string mesh_to_obj(const Mesh& mesh);
Mesh mesh_from_obj(std::string_view text);

nlohmann::json params_to_json(const FitParams& params);
FitParams params_from_json(const nlohmann::json& j);

nlohmann::json fit_result_to_json(const FitResult& result);
FitResult fit_result_from_json(const nlohmann::json& j);

nlohmann::json attributes_to_json(const AttributeCard& card);
AttributeCard attributes_from_json(const nlohmann::json& j);

nlohmann::json annotation_to_json(const Annotation& annotation);
Annotation annotation_from_json(const nlohmann::json& j);

/// Pins placed on one image.
struct PinFile
{
    std::string model_id;
    std::string image_ref;
    ImageSize image_size;
    std::vector<Pin> pins;
};

nlohmann::json pin_to_json(const Pin& pin);
Pin pin_from_json(const nlohmann::json& j, std::string_view where = "pin");
nlohmann::json pins_to_json(const PinFile& pins);
PinFile pins_from_json(const nlohmann::json& j);

/// Partial FitConfig: keys present override the defaults, unknown keys are rejected.
FitConfig fit_config_from_json(const nlohmann::json& j);
nlohmann::json fit_config_to_json(const FitConfig& config);

nlohmann::json report_to_json(const MetricReport& report);
MetricReport report_from_json(const nlohmann::json& j);

/// One image's label sets, and the box file used by the quality subcommand.
nlohmann::json labels_to_json(const LabeledImage& image);
LabeledImage labels_from_json(const nlohmann::json& j);
nlohmann::json bboxes_to_json(const std::map<std::string, BBox>& boxes);
std::map<std::string, BBox> bboxes_from_json(const nlohmann::json& j);

// Files. Saves write a sibling temporary file and rename it into place while
// holding a per-path lock, so readers never observe partial content.

std::string read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

nlohmann::json load_json(const std::filesystem::path& path);
void save_json(const std::filesystem::path& path, const nlohmann::json& j);

/// Chooses OBJ or JSON by extension (".obj" or anything else).
Mesh load_mesh(const std::filesystem::path& path);
void save_mesh(const std::filesystem::path& path, const Mesh& mesh);

Annotation load_annotation(const std::filesystem::path& path);
void save_annotation(const std::filesystem::path& path, const Annotation& annotation);
PinFile load_pins(const std::filesystem::path& path);
void save_pins(const std::filesystem::path& path, const PinFile& pins);
MetricReport load_report(const std::filesystem::path& path);
void save_report(const std::filesystem::path& path, const MetricReport& report);

struct Violation
{
    std::string field;
    std::string message;
};

/**
 * Checks an annotation against a model: vertex count, finite values, an
 * invertible model-view and frustum, a positive box and image size, a
 * recognized schema version and projection. Never throws.
 */
std::vector<Violation> validate_annotation(const Annotation& annotation, const HeadModel& model);

} // namespace headfit
