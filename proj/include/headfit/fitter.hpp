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

#include <optional>
#include <vector>

namespace headfit {

/// An annotator-placed correspondence between a model vertex and an image pixel.
struct Pin
{
    int vertex_id = 0;
    Eigen::Vector2d pixel = Eigen::Vector2d::Zero(); // px
    double weight = 1.0;
};

enum class JacobianMode { Analytic, FiniteDiff };

struct FitConfig
{
    // Tikhonov weights on beta, psi and the jaw rotation vector. When
    // scale_reg_with_pins is set they are multiplied by max(1, pin count), so
    // the prior loses influence as evidence accumulates.
    double reg_shape = 1e-3;
    double reg_expr = 1e-3;
    double reg_jaw = 1e-2;
    bool scale_reg_with_pins = true;

    int max_iters = 100;
    double lm_lambda0 = 1e-3;
    double tol_step = 1e-10; // on the normalized parameter step
    double tol_cost = 1e-12; // relative cost decrease of an accepted step
    JacobianMode jacobian_mode = JacobianMode::Analytic;
};

struct RegularizationWeights
{
    double shape = 0.0;
    double expr = 0.0;
    double jaw = 0.0;
};

RegularizationWeights effective_regularization(const FitConfig& config, std::size_t pin_count);

struct FitResult
{
    FitParams params;
    double final_cost = 0.0;    // 0.5 * |residuals|^2, px^2
    double rms_pin_error = 0.0; // px, unweighted
    int iterations = 0;
    bool converged = false;
    /// projected - pixel for every pin, px.
    std::vector<Eigen::Vector2d> per_pin_residuals;
    /// Cost after the initial evaluation and after every accepted step.
    std::vector<double> cost_history;
};

/**
 * weight * (projection - pixel) for every pin (two entries each), followed by
 * sqrt(reg) * beta, sqrt(reg) * psi, sqrt(reg) * jaw. Throws EmptyPins when
 * there are no pins and InvalidVertex on an out-of-range vertex id.
 */
Eigen::VectorXd residuals(const HeadModel& model, const FitParams& params, const std::vector<Pin>& pins,
                          const FitConfig& config);

/// Analytic derivative of residuals() with respect to the natural parameter
/// vector (see param_layout()).
Eigen::MatrixXd jacobian(const HeadModel& model, const FitParams& params, const std::vector<Pin>& pins,
                         const FitConfig& config);

/// Central finite differences of residuals(), step 1e-6 * max(1, |x_i|).
Eigen::MatrixXd jacobian_finite_diff(const HeadModel& model, const FitParams& params,
                                     const std::vector<Pin>& pins, const FitConfig& config);

/**
 * Closed-form pose from >= 4 non-coplanar pins: least-squares affine camera on
 * the decoded vertices, projected onto the nearest scaled rotation. Returns
 * nothing when the pins do not constrain an affine camera.
 */
std::optional<FitParams> estimate_pose_linear(const HeadModel& model, const ShapeParams& shape,
                                              const std::vector<Pin>& pins);

/**
 * Levenberg-Marquardt on 0.5 * |residuals|^2 over shape, expression, jaw,
 * rotation, scale and image-plane translation. Damping is divided by 10 after
 * an accepted step and multiplied by 10 after a rejected one.
 *
 * Without `init`, shape starts at zero and the pose comes from
 * estimate_pose_linear(), or FitParams::neutral() when that is not possible.
 * Zero pins return the starting point. Throws SingularSystem when all
 * regularization is zero and the pins cannot determine the parameters.
 */
FitResult fit(const HeadModel& model, const std::vector<Pin>& pins, const std::optional<FitParams>& init,
              const FitConfig& config = {});

/// Pins and the latest fit of one annotation session.
struct FitSession
{
    std::vector<Pin> pins;
    std::optional<FitResult> result;
    FitConfig config;
    FitParams neutral;
};

/// Adds `pin` and refits warm-started from the previous result.
FitResult refit_incremental(const HeadModel& model, FitSession& session, const Pin& pin);

/// Refits after arbitrary pin edits, warm-started from the previous result.
FitResult refit(const HeadModel& model, FitSession& session);

} // namespace headfit
