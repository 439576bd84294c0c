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

#include "headfit/rotations.hpp"
#include "headfit/types.hpp"

#include "Eigen/Core"

namespace headfit {

/// v' = scale * rotation * v + translation.
struct SimilarityTransform
{
    RotationMatrix rotation = RotationMatrix::Identity();
    double scale = 1.0;
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    Eigen::Vector3d apply(const Eigen::Vector3d& v) const { return scale * (rotation * v) + translation; }
    Eigen::Matrix4d matrix() const;
};

/// outer o inner, i.e. apply `inner` first.
SimilarityTransform compose(const SimilarityTransform& outer, const SimilarityTransform& inner);

Vertices apply_similarity(const Vertices& vertices, const SimilarityTransform& transform);

/// Drops z.
Points2D project_orthographic(const Vertices& vertices);

struct ProjectionMatrices
{
    Eigen::Matrix4d model_view = Eigen::Matrix4d::Identity();
    Eigen::Matrix4d frustum = Eigen::Matrix4d::Identity();
};

/**
 * model-view, then frustum, then perspective divide, then the viewport
 * mapping to pixels with the origin at the top-left and y pointing down.
 * Throws BehindCamera when a clip-space w is <= 1e-12.
 */
Points2D project_frustum(const Vertices& vertices, const ProjectionMatrices& matrices, ImageSize viewport);

/**
 * Matrices that reproduce the orthographic pixel projection of `transform`
 * through project_frustum: model_view is the similarity itself and the frustum
 * is an orthographic box over the image.
 */
ProjectionMatrices orthographic_matrices(const SimilarityTransform& transform, ImageSize image);

/**
 * Unit-cube normalization: centers the axis-aligned bounding box at the origin
 * and scales uniformly so the longest box side spans [-0.5, 0.5]. Throws
 * DegenerateExtent when all vertices coincide.
 */
Vertices unit_cube_normalize(const Vertices& vertices);

} // namespace headfit
