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
#include "headfit/losses.hpp"

#include "headfit/camera.hpp"
#include "headfit/error.hpp"
#include "headfit/simd/kernels.hpp"

#include <cmath>
#include <string>

namespace headfit {
namespace {

void require_same_rows(Eigen::Index a, Eigen::Index b, const char* what)
{
    if (a != b || a == 0)
        throw Error(ErrorCode::DimensionMismatch,
                    std::string(what) + ": " + std::to_string(a) + " vs " + std::to_string(b) + " rows");
}

double mean_abs_diff(const double* a, const double* b, Eigen::Index count)
{
    return simd::active_kernels().sum_abs_diff(a, b, static_cast<std::size_t>(count)) /
           static_cast<double>(count);
}

Vertices head_vertices(const HeadModel& model, const ShapeParams& params)
{
    return subsample(model, decode(model, params), subset_names::head);
}

} // namespace

double shape_expression_loss(const Vertices& pred, const Vertices& gt)
{
    require_same_rows(pred.rows(), gt.rows(), "shape_expression_loss");
    const Vertices np = unit_cube_normalize(pred);
    const Vertices ng = unit_cube_normalize(gt);
    return (np - ng).rowwise().norm().mean();
}

double shape_expression_loss(const HeadModel& model, const ShapeParams& pred, const ShapeParams& gt)
{
    check_dimensions(model, pred);
    check_dimensions(model, gt);
    return shape_expression_loss(head_vertices(model, pred), head_vertices(model, gt));
}

Eigen::VectorXd shape_expression_loss_gradient(const HeadModel& model, const ShapeParams& pred,
                                               const ShapeParams& gt)
{
    check_dimensions(model, pred);
    check_dimensions(model, gt);
    const std::vector<int> head = model.subset(subset_names::head);
    const Vertices p = head_vertices(model, pred);
    const Vertices ng = unit_cube_normalize(head_vertices(model, gt));
    const Eigen::Index n = p.rows();

    Eigen::Index argmin[3], argmax[3];
    Eigen::Vector3d lo, hi;
    for (int a = 0; a < 3; ++a)
    {
        lo[a] = p.col(a).minCoeff(&argmin[a]);
        hi[a] = p.col(a).maxCoeff(&argmax[a]);
    }
    Eigen::Index axis = 0;
    const double extent = (hi - lo).maxCoeff(&axis);
    const Eigen::Vector3d center = 0.5 * (lo + hi);

    // u_i = dL/d(phi_i)
    Vertices u(n, 3);
    for (Eigen::Index i = 0; i < n; ++i)
    {
        const Eigen::RowVector3d d = (p.row(i) - center.transpose()) / extent - ng.row(i);
        const double len = d.norm();
        u.row(i) = len > 0.0 ? Eigen::RowVector3d(d / (len * static_cast<double>(n))) : Eigen::RowVector3d::Zero();
    }
    const Eigen::RowVector3d u_sum = u.colwise().sum();
    double spread = 0.0; // sum_i u_i . (p_i - c) / e^2
    for (Eigen::Index i = 0; i < n; ++i)
        spread += u.row(i).dot(p.row(i) - center.transpose());
    spread /= extent * extent;

    // dL/dp_j through phi's dependence on p_j directly, on the box center and on the extent.
    Vertices g = u / extent;
    for (int a = 0; a < 3; ++a)
    {
        g(argmax[a], a) -= 0.5 * u_sum[a] / extent;
        g(argmin[a], a) -= 0.5 * u_sum[a] / extent;
    }
    g(argmax[axis], axis) -= spread;
    g(argmin[axis], axis) += spread;

    const int cols = model.shape_count() + model.expr_count() + 3;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(cols);
    Eigen::Matrix<double, 3, Eigen::Dynamic> jv(3, cols);
    for (Eigen::Index j = 0; j < n; ++j)
    {
        decode_vertex(model, pred, head[static_cast<std::size_t>(j)], jv);
        grad += jv.transpose() * g.row(j).transpose();
    }
    return grad;
}

double reprojection_loss(const HeadModel& model, const FitParams& pred, const Points2D& gt_projected)
{
    check_dimensions(model, pred.shape);
    const std::vector<int> head = model.subset(subset_names::head);
    require_same_rows(static_cast<Eigen::Index>(head.size()), gt_projected.rows(), "reprojection_loss");
    const Points2D projected = project_vertices(model, pred, head);
    return mean_abs_diff(projected.data(), gt_projected.data(), projected.size());
}

Eigen::VectorXd reprojection_loss_gradient(const HeadModel& model, const FitParams& pred,
                                           const Points2D& gt_projected)
{
    check_dimensions(model, pred.shape);
    const std::vector<int> head = model.subset(subset_names::head);
    require_same_rows(static_cast<Eigen::Index>(head.size()), gt_projected.rows(), "reprojection_loss");
    const ParamLayout layout = param_layout(model);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(layout.size);
    Eigen::Matrix<double, 2, Eigen::Dynamic> jp(2, layout.size);
    const double scale = 1.0 / static_cast<double>(2 * head.size());
    for (std::size_t i = 0; i < head.size(); ++i)
    {
        const Eigen::Vector2d q = project_vertex(model, pred, head[i], jp);
        const Eigen::Vector2d diff = q - gt_projected.row(static_cast<Eigen::Index>(i)).transpose();
        const Eigen::Vector2d sign(diff.x() > 0.0 ? 1.0 : diff.x() < 0.0 ? -1.0 : 0.0,
                                   diff.y() > 0.0 ? 1.0 : diff.y() < 0.0 ? -1.0 : 0.0);
        grad += scale * (jp.transpose() * sign);
    }
    return grad;
}

double landmark_l1(const Points2D& pred, const Points2D& gt)
{
    require_same_rows(pred.rows(), gt.rows(), "landmark_l1");
    return mean_abs_diff(pred.data(), gt.data(), pred.size());
}

double combined_loss(const LossComponents& c, const LossWeights& w)
{
    return w.lambda_3d * c.shape_expression + w.lambda_lmk * c.landmark + w.lambda_proj * c.reprojection +
           w.lambda_awing * c.awing;
}

} // namespace headfit
