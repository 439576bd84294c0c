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
#include "headfit/simd/kernels.hpp"

#include <cmath>

namespace headfit::simd {
namespace {

void accumulate_columns(double* out, const double* columns, std::size_t rows, const double* coeffs,
                        std::size_t cols)
{
    for (std::size_t c = 0; c < cols; ++c)
    {
        const double w = coeffs[c];
        if (w == 0.0)
            continue;
        const double* col = columns + c * rows;
        for (std::size_t r = 0; r < rows; ++r)
            out[r] = out[r] + col[r] * w;
    }
}

void squared_distances(const double* xs, const double* ys, const double* zs, std::size_t n, double qx,
                       double qy, double qz, double* out)
{
    for (std::size_t i = 0; i < n; ++i)
    {
        const double dx = xs[i] - qx;
        const double dy = ys[i] - qy;
        const double dz = zs[i] - qz;
        out[i] = dx * dx + dy * dy + dz * dz;
    }
}

NearestHit nearest(const double* xs, const double* ys, const double* zs, std::size_t n, double qx,
                   double qy, double qz)
{
    NearestHit best{INFINITY, 0};
    for (std::size_t i = 0; i < n; ++i)
    {
        const double dx = xs[i] - qx;
        const double dy = ys[i] - qy;
        const double dz = zs[i] - qz;
        const double d = dx * dx + dy * dy + dz * dz;
        if (d < best.squared_distance)
            best = {d, i};
    }
    return best;
}

double sum_abs_diff(const double* a, const double* b, std::size_t n)
{
    double s[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i)
        s[i % 4] += std::fabs(a[i] - b[i]);
    return (s[0] + s[1]) + (s[2] + s[3]);
}

} // namespace

const KernelTable& scalar_kernels()
{
    static const KernelTable table{"scalar", accumulate_columns, squared_distances, nearest, sum_abs_diff};
    return table;
}

} // namespace headfit::simd
