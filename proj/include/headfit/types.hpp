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

#include "Eigen/Core"

#include <array>
#include <vector>

namespace headfit {

/// K x 3 vertex array, one vertex per row.
using Vertices = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// N x 2 array of image points in pixels, one point per row.
using Points2D = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

using Triangle = std::array<int, 3>;
using Faces = std::vector<Triangle>;

struct ImageSize
{
    int width = 0;  // px
    int height = 0; // px
};

/// Head bounding box in pixels.
struct BBox
{
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;
};

} // namespace headfit
