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
#include "headfit/params.hpp"

namespace headfit {

SimilarityTransform FitParams::similarity() const
{
    return SimilarityTransform{six_d_to_matrix(rotation), scale, translation};
}

RotationMatrix image_frame_rotation()
{
    return rotation_x_deg(180.0);
}

FitParams FitParams::neutral(const HeadModel& model, ImageSize image)
{
    FitParams p;
    p.shape = ShapeParams::zeros(model);
    p.rotation = matrix_to_six_d(image_frame_rotation());
    if (image.width > 0 && image.height > 0 && model.vertex_count() > 0)
    {
        const Eigen::RowVector3d lo = model.template_vertices.colwise().minCoeff();
        const Eigen::RowVector3d hi = model.template_vertices.colwise().maxCoeff();
        const double height = hi.y() - lo.y();
        p.scale = height > 0.0 ? 0.6 * image.height / height : 1.0;
        const Eigen::Vector3d center = (0.5 * (lo + hi)).transpose();
        const Eigen::Vector3d posed = p.scale * (image_frame_rotation() * center);
        p.translation = Eigen::Vector3d(0.5 * image.width - posed.x(), 0.5 * image.height - posed.y(), 0.0);
    }
    return p;
}

ParamLayout param_layout(const HeadModel& model)
{
    ParamLayout l;
    l.beta = 0;
    l.psi = model.shape_count();
    l.jaw = l.psi + model.expr_count();
    l.rot_a = l.jaw + 3;
    l.rot_b = l.rot_a + 3;
    l.scale = l.rot_b + 3;
    l.tx = l.scale + 1;
    l.ty = l.tx + 1;
    l.size = l.ty + 1;
    return l;
}

Eigen::VectorXd pack(const HeadModel& model, const FitParams& params)
{
    check_dimensions(model, params.shape);
    const ParamLayout l = param_layout(model);
    Eigen::VectorXd x(l.size);
    x.segment(l.beta, model.shape_count()) = params.shape.beta;
    x.segment(l.psi, model.expr_count()) = params.shape.psi;
    x.segment<3>(l.jaw) = params.shape.jaw;
    x.segment<3>(l.rot_a) = params.rotation.a;
    x.segment<3>(l.rot_b) = params.rotation.b;
    x[l.scale] = params.scale;
    x[l.tx] = params.translation.x();
    x[l.ty] = params.translation.y();
    return x;
}

FitParams unpack(const HeadModel& model, const Eigen::VectorXd& x)
{
    const ParamLayout l = param_layout(model);
    FitParams p;
    p.shape.beta = x.segment(l.beta, model.shape_count());
    p.shape.psi = x.segment(l.psi, model.expr_count());
    p.shape.jaw = x.segment<3>(l.jaw);
    p.rotation.a = x.segment<3>(l.rot_a);
    p.rotation.b = x.segment<3>(l.rot_b);
    p.scale = x[l.scale];
    p.translation = Eigen::Vector3d(x[l.tx], x[l.ty], 0.0);
    return p;
}

Eigen::Vector2d project_vertex(const HeadModel& model, const FitParams& params, int vertex,
                               Eigen::Ref<Eigen::Matrix<double, 2, Eigen::Dynamic>> jacobian)
{
    const ParamLayout l = param_layout(model);
    const int shape_cols = model.shape_count() + model.expr_count() + 3;
    Eigen::Matrix<double, 3, Eigen::Dynamic> dv(3, shape_cols);
    const Eigen::Vector3d v = decode_vertex(model, params.shape, vertex, dv);
    const RotationMatrix r = six_d_to_matrix(params.rotation);
    const Eigen::Vector3d q = r * v;

    jacobian.setZero();
    jacobian.leftCols(shape_cols) = params.scale * (r.topRows<2>() * dv);
    const Eigen::Matrix<double, 3, 6> dr = six_d_rotate_jacobian(params.rotation, v);
    jacobian.middleCols<6>(l.rot_a) = params.scale * dr.topRows<2>();
    jacobian.col(l.scale) = q.head<2>();
    jacobian(0, l.tx) = 1.0;
    jacobian(1, l.ty) = 1.0;
    return params.scale * q.head<2>() + params.translation.head<2>();
}

Points2D project_vertices(const HeadModel& model, const FitParams& params, std::span<const int> indices)
{
    const Mesh mesh = decode(model, params.shape);
    return project_orthographic(apply_similarity(subsample(mesh.vertices, indices), params.similarity()));
}

} // namespace headfit
