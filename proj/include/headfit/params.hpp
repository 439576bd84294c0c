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
#include "headfit/morphable.hpp"
#include "headfit/rotations.hpp"

#include "Eigen/Core"

#include <span>

namespace headfit {

/// The full parameter set the fitter optimizes: shape, expression and jaw,
/// plus the similarity (6D rotation, scale, translation) that poses the mesh.
struct FitParams
{
    ShapeParams shape;
    Rotation6D rotation;
    double scale = 1.0;
    /// Pixels. z is unobservable under orthographic projection and kept at 0.
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    SimilarityTransform similarity() const;

    /**
     * Zero coefficients, rotation into the image frame, and (for a non-empty
     * image) a scale and translation that center the template in the image at
     * 60% of its height.
     */
    static FitParams neutral(const HeadModel& model, ImageSize image = {});
};

/// 180 degrees about x: takes the model frame (y up, face toward +z) to the
/// image frame (y down, viewing direction +z).
RotationMatrix image_frame_rotation();

/// Offsets into the natural parameter vector [beta, psi, jaw, a, b, s, tx, ty].
struct ParamLayout
{
    int beta = 0;
    int psi = 0;
    int jaw = 0;
    int rot_a = 0;
    int rot_b = 0;
    int scale = 0;
    int tx = 0;
    int ty = 0;
    int size = 0;
};

ParamLayout param_layout(const HeadModel& model);
Eigen::VectorXd pack(const HeadModel& model, const FitParams& params);
FitParams unpack(const HeadModel& model, const Eigen::VectorXd& x);

/**
 * Pixel position of one vertex under decode -> similarity -> orthographic
 * projection, with its 2 x P derivative with respect to the natural
 * parameter vector written into `jacobian`.
 */
Eigen::Vector2d project_vertex(const HeadModel& model, const FitParams& params, int vertex,
                               Eigen::Ref<Eigen::Matrix<double, 2, Eigen::Dynamic>> jacobian);

/// Pixel positions of the given vertices (full decode path).
Points2D project_vertices(const HeadModel& model, const FitParams& params, std::span<const int> indices);

} // namespace headfit
