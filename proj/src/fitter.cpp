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
#include "headfit/fitter.hpp"

#include "headfit/error.hpp"

#include "Eigen/Dense"

#include <algorithm>
#include <cmath>
#include <string>

namespace headfit {
namespace {

void validate(const HeadModel& model, const std::vector<Pin>& pins, const FitConfig& config)
{
    if (config.reg_shape < 0.0 || config.reg_expr < 0.0 || config.reg_jaw < 0.0 || config.lm_lambda0 < 0.0 ||
        config.tol_step < 0.0 || config.tol_cost < 0.0 || config.max_iters < 1)
        throw Error(ErrorCode::InvalidArgument, "fit configuration values must be nonnegative, max_iters >= 1");
    for (const Pin& pin : pins)
    {
        if (pin.vertex_id < 0 || pin.vertex_id >= model.vertex_count())
            throw Error(ErrorCode::InvalidVertex, "pin vertex id " + std::to_string(pin.vertex_id) +
                                                      " outside [0, " + std::to_string(model.vertex_count()) + ")");
        if (!pin.pixel.allFinite() || !(pin.weight > 0.0) || !std::isfinite(pin.weight))
            throw Error(ErrorCode::InvalidArgument, "pin pixel must be finite and weight positive");
    }
}

Eigen::VectorXd residuals_unchecked(const HeadModel& model, const FitParams& params, const std::vector<Pin>& pins,
                                    const RegularizationWeights& reg)
{
    const int s = model.shape_count();
    const int e = model.expr_count();
    const auto n = static_cast<Eigen::Index>(pins.size());
    Eigen::VectorXd r(2 * n + s + e + 3);
    if (n > 0)
    {
        std::vector<int> ids;
        ids.reserve(pins.size());
        for (const Pin& p : pins)
            ids.push_back(p.vertex_id);
        const Points2D projected = project_vertices(model, params, ids);
        for (Eigen::Index k = 0; k < n; ++k)
        {
            const Pin& pin = pins[static_cast<std::size_t>(k)];
            r.segment<2>(2 * k) = pin.weight * (projected.row(k).transpose() - pin.pixel);
        }
    }
    r.segment(2 * n, s) = std::sqrt(reg.shape) * params.shape.beta;
    r.segment(2 * n + s, e) = std::sqrt(reg.expr) * params.shape.psi;
    r.segment<3>(2 * n + s + e) = std::sqrt(reg.jaw) * params.shape.jaw;
    return r;
}

Eigen::MatrixXd jacobian_unchecked(const HeadModel& model, const FitParams& params, const std::vector<Pin>& pins,
                                   const RegularizationWeights& reg)
{
    const ParamLayout l = param_layout(model);
    const int s = model.shape_count();
    const int e = model.expr_count();
    const auto n = static_cast<Eigen::Index>(pins.size());
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(2 * n + s + e + 3, l.size);
    Eigen::Matrix<double, 2, Eigen::Dynamic> block(2, l.size);
    for (Eigen::Index k = 0; k < n; ++k)
    {
        const Pin& pin = pins[static_cast<std::size_t>(k)];
        project_vertex(model, params, pin.vertex_id, block);
        j.middleRows<2>(2 * k) = pin.weight * block;
    }
    const Eigen::Index reg_row = 2 * n;
    for (int i = 0; i < s; ++i)
        j(reg_row + i, l.beta + i) = std::sqrt(reg.shape);
    for (int i = 0; i < e; ++i)
        j(reg_row + s + i, l.psi + i) = std::sqrt(reg.expr);
    for (int i = 0; i < 3; ++i)
        j(reg_row + s + e + i, l.jaw + i) = std::sqrt(reg.jaw);
    return j;
}

Eigen::MatrixXd finite_diff_unchecked(const HeadModel& model, const FitParams& params, const std::vector<Pin>& pins,
                                      const RegularizationWeights& reg)
{
    const Eigen::VectorXd x = pack(model, params);
    const Eigen::VectorXd r0 = residuals_unchecked(model, params, pins, reg);
    Eigen::MatrixXd j(r0.size(), x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i)
    {
        const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
        Eigen::VectorXd xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        j.col(i) = (residuals_unchecked(model, unpack(model, xp), pins, reg) -
                    residuals_unchecked(model, unpack(model, xm), pins, reg)) /
                   (xp[i] - xm[i]);
    }
    return j;
}

// Internal coordinates: log scale, translation divided by a pixel length
// scale, all other parameters unchanged. Keeps the damping roughly isotropic.
struct Normalization
{
    ParamLayout layout;
    double pixel_scale = 1.0;

    Eigen::VectorXd to_internal(Eigen::VectorXd x) const
    {
        x[layout.scale] = std::log(x[layout.scale]);
        x[layout.tx] /= pixel_scale;
        x[layout.ty] /= pixel_scale;
        return x;
    }
    Eigen::VectorXd to_natural(Eigen::VectorXd z) const
    {
        z[layout.scale] = std::exp(z[layout.scale]);
        z[layout.tx] *= pixel_scale;
        z[layout.ty] *= pixel_scale;
        return z;
    }
    void scale_columns(Eigen::MatrixXd& j, const Eigen::VectorXd& x) const
    {
        j.col(layout.scale) *= x[layout.scale];
        j.col(layout.tx) *= pixel_scale;
        j.col(layout.ty) *= pixel_scale;
    }
};

double pin_extent(const std::vector<Pin>& pins)
{
    if (pins.empty())
        return 1.0;
    Eigen::Vector2d lo = pins.front().pixel, hi = pins.front().pixel;
    for (const Pin& p : pins)
    {
        lo = lo.cwiseMin(p.pixel);
        hi = hi.cwiseMax(p.pixel);
    }
    return std::max(1.0, (hi - lo).norm());
}

// Re-express the 6D rotation by its orthonormal columns. R is unchanged.
void canonicalize_rotation(FitParams& p)
{
    p.rotation = matrix_to_six_d(six_d_to_matrix(p.rotation));
}

void finish(const HeadModel& model, const std::vector<Pin>& pins, const RegularizationWeights& reg,
            FitResult& result)
{
    const Eigen::VectorXd r = residuals_unchecked(model, result.params, pins, reg);
    result.final_cost = 0.5 * r.squaredNorm();
    result.per_pin_residuals.clear();
    double sum_sq = 0.0;
    if (!pins.empty())
    {
        std::vector<int> ids;
        for (const Pin& p : pins)
            ids.push_back(p.vertex_id);
        const Points2D projected = project_vertices(model, result.params, ids);
        for (std::size_t k = 0; k < pins.size(); ++k)
        {
            const Eigen::Vector2d d = projected.row(static_cast<Eigen::Index>(k)).transpose() - pins[k].pixel;
            result.per_pin_residuals.push_back(d);
            sum_sq += d.squaredNorm();
        }
        result.rms_pin_error = std::sqrt(sum_sq / static_cast<double>(pins.size()));
    }
    else
    {
        result.rms_pin_error = 0.0;
    }
}

} // namespace

RegularizationWeights effective_regularization(const FitConfig& config, std::size_t pin_count)
{
    const double factor = config.scale_reg_with_pins ? std::max<double>(1.0, static_cast<double>(pin_count)) : 1.0;
    return {config.reg_shape * factor, config.reg_expr * factor, config.reg_jaw * factor};
}

Eigen::VectorXd residuals(const HeadModel& model, const FitParams& params, const std::vector<Pin>& pins,
                          const FitConfig& config)
{
    if (pins.empty())
        throw Error(ErrorCode::EmptyPins, "residuals need at least one pin");
    validate(model, pins, config);
    check_dimensions(model, params.shape);
    return residuals_unchecked(model, params, pins, effective_regularization(config, pins.size()));
}

Eigen::MatrixXd jacobian(const HeadModel& model, const FitParams& params, const std::vector<Pin>& pins,
                         const FitConfig& config)
{
    if (pins.empty())
        throw Error(ErrorCode::EmptyPins, "jacobian needs at least one pin");
    validate(model, pins, config);
    check_dimensions(model, params.shape);
    return jacobian_unchecked(model, params, pins, effective_regularization(config, pins.size()));
}

Eigen::MatrixXd jacobian_finite_diff(const HeadModel& model, const FitParams& params,
                                     const std::vector<Pin>& pins, const FitConfig& config)
{
    if (pins.empty())
        throw Error(ErrorCode::EmptyPins, "jacobian needs at least one pin");
    validate(model, pins, config);
    check_dimensions(model, params.shape);
    return finite_diff_unchecked(model, params, pins, effective_regularization(config, pins.size()));
}

std::optional<FitParams> estimate_pose_linear(const HeadModel& model, const ShapeParams& shape,
                                              const std::vector<Pin>& pins)
{
    if (pins.size() < 4)
        return std::nullopt;
    const Mesh mesh = decode(model, shape);
    double wsum = 0.0;
    Eigen::Vector3d xbar = Eigen::Vector3d::Zero();
    Eigen::Vector2d ubar = Eigen::Vector2d::Zero();
    for (const Pin& p : pins)
    {
        xbar += p.weight * mesh.vertices.row(p.vertex_id).transpose();
        ubar += p.weight * p.pixel;
        wsum += p.weight;
    }
    xbar /= wsum;
    ubar /= wsum;
    Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
    Eigen::Matrix<double, 2, 3> c = Eigen::Matrix<double, 2, 3>::Zero();
    for (const Pin& p : pins)
    {
        const Eigen::Vector3d dx = mesh.vertices.row(p.vertex_id).transpose() - xbar;
        m += p.weight * dx * dx.transpose();
        c += p.weight * (p.pixel - ubar) * dx.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(m);
    const Eigen::Vector3d ev = eig.eigenvalues();
    if (!(ev.minCoeff() > 1e-8 * ev.maxCoeff()))
        return std::nullopt;
    const Eigen::Matrix<double, 2, 3> a = c * m.inverse();
    const double n1 = a.row(0).norm();
    const double n2 = a.row(1).norm();
    if (!(n1 > 0.0 && n2 > 0.0))
        return std::nullopt;
    Eigen::Matrix3d rows;
    rows.row(0) = a.row(0) / n1;
    rows.row(1) = a.row(1) / n2;
    rows.row(2) = rows.row(0).cross(rows.row(1));
    if (!(rows.row(2).norm() > 1e-6))
        return std::nullopt;
    rows.row(2).normalize();

    FitParams p;
    p.shape = shape;
    const RotationMatrix r = nearest_rotation(rows);
    p.rotation = matrix_to_six_d(r);
    p.scale = 0.5 * (n1 + n2);
    const Eigen::Vector3d posed = p.scale * (r * xbar);
    p.translation = Eigen::Vector3d(ubar.x() - posed.x(), ubar.y() - posed.y(), 0.0);
    return p;
}

FitResult fit(const HeadModel& model, const std::vector<Pin>& pins, const std::optional<FitParams>& init,
              const FitConfig& config)
{
    validate(model, pins, config);
    const RegularizationWeights reg = effective_regularization(config, pins.size());
    const ParamLayout layout = param_layout(model);

    FitResult result;
    if (init)
    {
        check_dimensions(model, init->shape);
        result.params = *init;
    }
    else
    {
        const ShapeParams zero = ShapeParams::zeros(model);
        result.params = estimate_pose_linear(model, zero, pins).value_or(FitParams::neutral(model));
    }
    result.params.translation.z() = 0.0;
    if (!(result.params.scale > 0.0))
        throw Error(ErrorCode::InvalidArgument, "initial scale must be positive");
    canonicalize_rotation(result.params);
    if (pins.empty())
    {
        result.converged = true;
        result.cost_history.push_back(0.5 * residuals_unchecked(model, result.params, pins, reg).squaredNorm());
        finish(model, pins, reg, result);
        return result;
    }

    const bool unregularized = reg.shape == 0.0 && reg.expr == 0.0 && reg.jaw == 0.0;
    const auto jac = [&](const FitParams& p) {
        return config.jacobian_mode == JacobianMode::Analytic ? jacobian_unchecked(model, p, pins, reg)
                                                              : finite_diff_unchecked(model, p, pins, reg);
    };

    if (unregularized)
    {
        // The 6D rotation carries three gauge directions; anything beyond
        // those means the pins do not pin down the parameters.
        const Eigen::MatrixXd j0 = jac(result.params);
        Eigen::Index rank = 0;
        if (j0.size() > 0)
        {
            Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(j0);
            qr.setThreshold(1e-10);
            rank = qr.rank();
        }
        if (rank < layout.size - 3)
            throw Error(ErrorCode::SingularSystem,
                        "unregularized fit with " + std::to_string(pins.size()) + " pins has rank " +
                            std::to_string(rank) + " < " + std::to_string(layout.size - 3));
    }

    const Normalization norm{layout, pin_extent(pins)};
    Eigen::VectorXd x = pack(model, result.params);
    Eigen::VectorXd z = norm.to_internal(x);
    Eigen::VectorXd r = residuals_unchecked(model, result.params, pins, reg);
    double cost = 0.5 * r.squaredNorm();
    result.cost_history.push_back(cost);

    double lambda = config.lm_lambda0;
    bool recompute = true;
    Eigen::MatrixXd jz;
    Eigen::VectorXd g;
    Eigen::MatrixXd h;
    while (result.iterations < config.max_iters)
    {
        ++result.iterations;
        if (recompute)
        {
            jz = jac(result.params);
            norm.scale_columns(jz, x);
            g = jz.transpose() * r;
            h = jz.transpose() * jz;
            recompute = false;
        }
        Eigen::MatrixXd damped = h;
        damped.diagonal().array() += lambda;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
        Eigen::VectorXd step = ldlt.solve(-g);
        if (ldlt.info() != Eigen::Success || !step.allFinite())
        {
            lambda *= 10.0;
            if (lambda > 1e16)
                break;
            continue;
        }
        if (step.norm() < config.tol_step)
        {
            result.converged = true;
            break;
        }

        const Eigen::VectorXd z_new = z + step;
        const Eigen::VectorXd x_new = norm.to_natural(z_new);
        FitParams candidate = unpack(model, x_new);
        double cost_new = INFINITY;
        Eigen::VectorXd r_new;
        try
        {
            r_new = residuals_unchecked(model, candidate, pins, reg);
            cost_new = 0.5 * r_new.squaredNorm();
        }
        catch (const Error&)
        {
            // A step that degenerates the 6D rotation is simply rejected.
        }

        if (std::isfinite(cost_new) && cost_new < cost)
        {
            const double decrease = (cost - cost_new) / std::max(cost, 1e-300);
            canonicalize_rotation(candidate);
            result.params = candidate;
            x = pack(model, candidate);
            z = norm.to_internal(x);
            r = residuals_unchecked(model, candidate, pins, reg);
            cost = cost_new;
            result.cost_history.push_back(cost);
            lambda = std::max(lambda / 10.0, 1e-15);
            recompute = true;
            if (decrease < config.tol_cost)
            {
                result.converged = true;
                break;
            }
        }
        else
        {
            lambda *= 10.0;
            if (lambda > 1e16)
            {
                // No descent direction left at machine precision.
                result.converged = true;
                break;
            }
        }
    }

    finish(model, pins, reg, result);
    return result;
}

FitResult refit_incremental(const HeadModel& model, FitSession& session, const Pin& pin)
{
    session.pins.push_back(pin);
    try
    {
        return refit(model, session);
    }
    catch (...)
    {
        session.pins.pop_back();
        throw;
    }
}

FitResult refit(const HeadModel& model, FitSession& session)
{
    // Without pins there is nothing to hold the previous pose; fall back to neutral.
    const FitParams start = session.result && !session.pins.empty() ? session.result->params : session.neutral;
    FitResult result = fit(model, session.pins, start, session.config);
    session.result = result;
    return result;
}

} // namespace headfit
