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
#include "headfit/camera.hpp"

#include "headfit/error.hpp"

#include "Eigen/Geometry"

#include <string>

namespace headfit {

Eigen::Matrix4d SimilarityTransform::matrix() const
{
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = scale * rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
}

SimilarityTransform compose(const SimilarityTransform& outer, const SimilarityTransform& inner)
{
    SimilarityTransform out;
    out.rotation = outer.rotation * inner.rotation;
    out.scale = outer.scale * inner.scale;
    out.translation = outer.scale * (outer.rotation * inner.translation) + outer.translation;
    return out;
}

Vertices apply_similarity(const Vertices& vertices, const SimilarityTransform& transform)
{
    Vertices out = (vertices * (transform.scale * transform.rotation).transpose()).rowwise() +
                   transform.translation.transpose();
    return out;
}

Points2D project_orthographic(const Vertices& vertices)
{
    return vertices.leftCols<2>();
}

Points2D project_frustum(const Vertices& vertices, const ProjectionMatrices& matrices, ImageSize viewport)
{
    const Eigen::Matrix4d full = matrices.frustum * matrices.model_view;
    Points2D out(vertices.rows(), 2);
    for (Eigen::Index i = 0; i < vertices.rows(); ++i)
    {
        const Eigen::Vector4d clip = full * vertices.row(i).transpose().homogeneous();
        if (!(clip.w() > 1e-12))
            throw Error(ErrorCode::BehindCamera, "vertex " + std::to_string(i) + " has clip w <= 1e-12");
        const double x_ndc = clip.x() / clip.w();
        const double y_ndc = clip.y() / clip.w();
        out(i, 0) = 0.5 * (x_ndc + 1.0) * viewport.width;
        out(i, 1) = 0.5 * (1.0 - y_ndc) * viewport.height;
    }
    return out;
}

ProjectionMatrices orthographic_matrices(const SimilarityTransform& transform, ImageSize image)
{
    const double w = image.width;
    const double h = image.height;
    ProjectionMatrices m;
    m.model_view = transform.matrix();
    // Pixel (x, y) -> NDC, depth squeezed by the image size so the box is invertible.
    m.frustum << 2.0 / w, 0.0, 0.0, -1.0,
                 0.0, -2.0 / h, 0.0, 1.0,
                 0.0, 0.0, 1.0 / (w + h), 0.0,
                 0.0, 0.0, 0.0, 1.0;
    return m;
}

Vertices unit_cube_normalize(const Vertices& vertices)
{
    if (vertices.rows() == 0)
        throw Error(ErrorCode::DegenerateExtent, "no vertices");
    const Eigen::RowVector3d lo = vertices.colwise().minCoeff();
    const Eigen::RowVector3d hi = vertices.colwise().maxCoeff();
    const double extent = (hi - lo).maxCoeff();
    if (!(extent > 0.0))
        throw Error(ErrorCode::DegenerateExtent, "all vertices coincide");
    const Eigen::RowVector3d center = 0.5 * (lo + hi);
    Vertices out = (vertices.rowwise() - center) / extent;
    return out;
}

} // namespace headfit
