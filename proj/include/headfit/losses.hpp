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

#include "headfit/morphable.hpp"
#include "headfit/params.hpp"
#include "headfit/types.hpp"

#include "Eigen/Core"

namespace headfit {

/// Weights of the combined training objective (shape+expression,
/// landmark L1, reprojection, heatmap).
struct LossWeights
{
    double lambda_3d = 50.0;
    double lambda_lmk = 1.0;
    double lambda_proj = 0.05;
    double lambda_awing = 1.0;
};

struct LossComponents
{
    double shape_expression = 0.0;
    double landmark = 0.0;
    double reprojection = 0.0;
    double awing = 0.0; // computed elsewhere; this library only weights it
};

// Shape+expression discrepancy: mean per-vertex Euclidean distance between
// the unit-cube normalized vertex sets. Reducing by the mean (rather than the
// norm of the whole stacked array) keeps the value independent of the subset
// size.
double shape_expression_loss(const Vertices& pred, const Vertices& gt);

/// Decodes both parameter sets without global rotation and compares them on
/// the "head" subset.
double shape_expression_loss(const HeadModel& model, const ShapeParams& pred, const ShapeParams& gt);

/// d/d(beta, psi, jaw) of the model overload, with respect to `pred`.
Eigen::VectorXd shape_expression_loss_gradient(const HeadModel& model, const ShapeParams& pred,
                                               const ShapeParams& gt);

/// Mean absolute coordinate difference between the posed, orthographically
/// projected head vertices and `gt_projected` (one row per head vertex).
double reprojection_loss(const HeadModel& model, const FitParams& pred, const Points2D& gt_projected);

/// d/dx of reprojection_loss over the natural parameter vector (param_layout()).
Eigen::VectorXd reprojection_loss_gradient(const HeadModel& model, const FitParams& pred,
                                           const Points2D& gt_projected);

/// Mean absolute coordinate difference of two equal-length landmark arrays.
double landmark_l1(const Points2D& pred, const Points2D& gt);

double combined_loss(const LossComponents& components, const LossWeights& weights = {});

} // namespace headfit
