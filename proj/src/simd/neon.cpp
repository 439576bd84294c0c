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
// aarch64 only; NEON is part of the base ISA there, so no runtime check is needed.

#include "headfit/simd/kernels.hpp"

#include <arm_neon.h>

#include <cmath>

namespace headfit::simd {
namespace {

void accumulate_columns_neon(double* out, const double* columns, std::size_t rows, const double* coeffs,
                             std::size_t cols)
{
    for (std::size_t c = 0; c < cols; ++c)
    {
        const double w = coeffs[c];
        if (w == 0.0)
            continue;
        const double* col = columns + c * rows;
        const float64x2_t wv = vdupq_n_f64(w);
        std::size_t r = 0;
        for (; r + 2 <= rows; r += 2)
            vst1q_f64(out + r, vaddq_f64(vld1q_f64(out + r), vmulq_f64(vld1q_f64(col + r), wv)));
        for (; r < rows; ++r)
            out[r] = out[r] + col[r] * w;
    }
}

inline float64x2_t squared_distance2(const double* xs, const double* ys, const double* zs, std::size_t i,
                                     float64x2_t qx, float64x2_t qy, float64x2_t qz)
{
    const float64x2_t dx = vsubq_f64(vld1q_f64(xs + i), qx);
    const float64x2_t dy = vsubq_f64(vld1q_f64(ys + i), qy);
    const float64x2_t dz = vsubq_f64(vld1q_f64(zs + i), qz);
    return vaddq_f64(vaddq_f64(vmulq_f64(dx, dx), vmulq_f64(dy, dy)), vmulq_f64(dz, dz));
}

void squared_distances_neon(const double* xs, const double* ys, const double* zs, std::size_t n, double qx,
                            double qy, double qz, double* out)
{
    const float64x2_t qxv = vdupq_n_f64(qx);
    const float64x2_t qyv = vdupq_n_f64(qy);
    const float64x2_t qzv = vdupq_n_f64(qz);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(out + i, squared_distance2(xs, ys, zs, i, qxv, qyv, qzv));
    for (; i < n; ++i)
    {
        const double dx = xs[i] - qx;
        const double dy = ys[i] - qy;
        const double dz = zs[i] - qz;
        out[i] = dx * dx + dy * dy + dz * dz;
    }
}

NearestHit nearest_neon(const double* xs, const double* ys, const double* zs, std::size_t n, double qx,
                        double qy, double qz)
{
    const float64x2_t qxv = vdupq_n_f64(qx);
    const float64x2_t qyv = vdupq_n_f64(qy);
    const float64x2_t qzv = vdupq_n_f64(qz);
    NearestHit hit{INFINITY, 0};
    double lane[2];
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
    {
        vst1q_f64(lane, squared_distance2(xs, ys, zs, i, qxv, qyv, qzv));
        if (lane[0] < hit.squared_distance)
            hit = {lane[0], i};
        if (lane[1] < hit.squared_distance)
            hit = {lane[1], i + 1};
    }
    for (; i < n; ++i)
    {
        const double dx = xs[i] - qx;
        const double dy = ys[i] - qy;
        const double dz = zs[i] - qz;
        const double d = dx * dx + dy * dy + dz * dz;
        if (d < hit.squared_distance)
            hit = {d, i};
    }
    return hit;
}

double sum_abs_diff_neon(const double* a, const double* b, std::size_t n)
{
    // Two accumulators of two lanes reproduce the scalar i % 4 lane layout.
    float64x2_t acc01 = vdupq_n_f64(0.0);
    float64x2_t acc23 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
    {
        acc01 = vaddq_f64(acc01, vabsq_f64(vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i))));
        acc23 = vaddq_f64(acc23, vabsq_f64(vsubq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2))));
    }
    double s[4];
    vst1q_f64(s, acc01);
    vst1q_f64(s + 2, acc23);
    for (; i < n; ++i)
        s[i % 4] += std::fabs(a[i] - b[i]);
    return (s[0] + s[1]) + (s[2] + s[3]);
}

} // namespace

const KernelTable& neon_table()
{
    static const KernelTable table{"neon", accumulate_columns_neon, squared_distances_neon, nearest_neon,
                                   sum_abs_diff_neon};
    return table;
}

} // namespace headfit::simd
