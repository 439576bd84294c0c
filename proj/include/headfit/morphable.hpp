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

#include "headfit/types.hpp"

#include "Eigen/Core"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace headfit {

/// Vertex count, "head" subset size and coefficient capacities of the
/// FLAME-topology model the tools are built around.
inline constexpr int kCanonicalVertexCount = 5023;
inline constexpr int kCanonicalHeadCount = 3669;
inline constexpr int kCanonicalShapeCount = 300;
inline constexpr int kCanonicalExprCount = 100;

/// Registered subset names. "full" is implicit and always available.
namespace subset_names {
inline constexpr std::string_view full = "full";
inline constexpr std::string_view head = "head";
inline constexpr std::string_view face = "face";
inline constexpr std::string_view keypoint7 = "keypoint7";
inline constexpr std::string_view landmark68 = "landmark68";
inline constexpr std::string_view landmark191 = "landmark191";
inline constexpr std::string_view landmark445 = "landmark445";
} // namespace subset_names

/**
 * Linear parametric head model: template plus shape and expression bases and a
 * single weighted jaw joint.
 *
 * Bases are 3K x S (3K x E) matrices, column-major, one column per
 * coefficient; row 3*i + c holds coordinate c of vertex i.
 */
struct HeadModel
{
    Vertices template_vertices;
    Eigen::MatrixXd shape_basis;
    Eigen::MatrixXd expr_basis;
    Eigen::Vector3d jaw_joint = Eigen::Vector3d::Zero();
    Eigen::VectorXd jaw_weights; // K, in [0, 1]
    std::map<std::string, std::vector<int>, std::less<>> subsets;
    Faces faces;
    /// True when the subset index lists were generated rather than shipped as data.
    bool synthetic_subsets = false;

    int vertex_count() const { return static_cast<int>(template_vertices.rows()); }
    int shape_count() const { return static_cast<int>(shape_basis.cols()); }
    int expr_count() const { return static_cast<int>(expr_basis.cols()); }

    /// Index list of a named subset; "full" yields 0..K-1. Throws UnknownSubset.
    std::vector<int> subset(std::string_view name) const;
    bool has_subset(std::string_view name) const;
};

/// Violations of the HeadModel invariants, empty when the model is valid.
std::vector<std::string> check_invariants(const HeadModel& model);

struct ShapeParams
{
    Eigen::VectorXd beta;
    Eigen::VectorXd psi;
    Eigen::Vector3d jaw = Eigen::Vector3d::Zero(); // rotation vector, radians

    static ShapeParams zeros(const HeadModel& model);
};

struct Mesh
{
    Vertices vertices;
    Faces faces;
};

/// Throws DimensionMismatch when the coefficient counts do not match the model.
void check_dimensions(const HeadModel& model, const ShapeParams& params);

/// v = template + B_shape beta + B_expr psi, followed by the weighted jaw rotation
/// v_i' = joint + R(w_i * jaw) (v_i - joint).
Mesh decode(const HeadModel& model, const ShapeParams& params);

/**
 * One decoded vertex and its derivative with respect to (beta, psi, jaw), a
 * 3 x (S + E + 3) block written into `jacobian`.
 */
Eigen::Vector3d decode_vertex(const HeadModel& model, const ShapeParams& params, int vertex,
                              Eigen::Ref<Eigen::Matrix<double, 3, Eigen::Dynamic>> jacobian);

/// Rows of `vertices` at `indices`, in order. Throws InvalidArgument on a bad index.
Vertices subsample(const Vertices& vertices, std::span<const int> indices);
Vertices subsample(const HeadModel& model, const Mesh& mesh, std::string_view subset);

/**
 * Deterministic stand-in model: an ellipsoid template triangulated ring by
 * ring, smooth random bases scaled so a unit coefficient moves no vertex by
 * more than 5% of the template extent, a jaw weight ramp over the lower third,
 * and generated subsets (flagged as synthetic). For K = 5023 the head subset
 * has the canonical 3669 vertices. Throws InvalidCounts unless K >= 16, S >= 1
 * and E >= 1.
 */
HeadModel synth_model(std::uint64_t seed, int vertex_count, int shape_count, int expr_count);

} // namespace headfit
