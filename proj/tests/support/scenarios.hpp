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
#include "headfit/camera.hpp"
#include "headfit/fitter.hpp"
#include "headfit/params.hpp"

#include "support/generators.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace headfit::testing {

/// `count` distinct vertex ids drawn uniformly.
inline std::vector<int> pick_vertices(Gen& gen, int vertex_count, int count)
{
    std::vector<int> ids(static_cast<std::size_t>(vertex_count));
    std::iota(ids.begin(), ids.end(), 0);
    std::shuffle(ids.begin(), ids.end(), gen.engine());
    ids.resize(static_cast<std::size_t>(std::min(count, vertex_count)));
    std::sort(ids.begin(), ids.end());
    return ids;
}

/// Pins at the exact projections of `truth`, plus isotropic Gaussian pixel noise.
inline std::vector<Pin> make_pins(Gen& gen, const HeadModel& model, const FitParams& truth,
                                  const std::vector<int>& ids, double noise_px)
{
    const Points2D px = project_vertices(model, truth, ids);
    std::vector<Pin> pins;
    for (std::size_t k = 0; k < ids.size(); ++k)
    {
        Pin p;
        p.vertex_id = ids[k];
        p.pixel = px.row(static_cast<Eigen::Index>(k)).transpose();
        if (noise_px > 0.0)
            p.pixel += Eigen::Vector2d(gen.normal(0, noise_px), gen.normal(0, noise_px));
        pins.push_back(p);
    }
    return pins;
}

/// max_ij |A - B| / max(1, max_i |B_ij|), column-wise normalization by the reference.
inline double max_relative_column_error(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& reference)
{
    double worst = 0.0;
    for (Eigen::Index c = 0; c < reference.cols(); ++c)
    {
        const double scale = std::max(1.0, reference.col(c).cwiseAbs().maxCoeff());
        worst = std::max(worst, (analytic.col(c) - reference.col(c)).cwiseAbs().maxCoeff() / scale);
    }
    return worst;
}

/// Ground-truth style annotation of `params` on an image of the given size.
inline Annotation make_annotation(const HeadModel& model, const FitParams& params, ImageSize image)
{
    Annotation a;
    a.model_id = "synthetic";
    a.image_size = image;
    a.vertices = decode(model, params.shape).vertices;
    a.matrices = orthographic_matrices(params.similarity(), image);
    const Points2D head = project_vertices(model, params, model.subset(subset_names::head));
    const Eigen::RowVector2d lo = head.colwise().minCoeff();
    const Eigen::RowVector2d hi = head.colwise().maxCoeff();
    a.bbox = {lo.x(), lo.y(), hi.x() - lo.x(), hi.y() - lo.y()};
    return a;
}

} // namespace headfit::testing
