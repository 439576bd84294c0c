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
// Built with -mavx2. Only reached after a runtime CPU check in dispatch.cpp.

#include "headfit/simd/kernels.hpp"

#include <immintrin.h>

#include <cmath>
#include <cstdint>

namespace headfit::simd {
namespace {

void accumulate_columns_avx2(double* out, const double* columns, std::size_t rows, const double* coeffs,
                             std::size_t cols)
{
    for (std::size_t c = 0; c < cols; ++c)
    {
        const double w = coeffs[c];
        if (w == 0.0)
            continue;
        const double* col = columns + c * rows;
        const __m256d wv = _mm256_set1_pd(w);
        std::size_t r = 0;
        for (; r + 4 <= rows; r += 4)
        {
            const __m256d prod = _mm256_mul_pd(_mm256_loadu_pd(col + r), wv);
            _mm256_storeu_pd(out + r, _mm256_add_pd(_mm256_loadu_pd(out + r), prod));
        }
        for (; r < rows; ++r)
            out[r] = out[r] + col[r] * w;
    }
}

inline __m256d squared_distance4(const double* xs, const double* ys, const double* zs, std::size_t i,
                                 __m256d qx, __m256d qy, __m256d qz)
{
    const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(xs + i), qx);
    const __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(ys + i), qy);
    const __m256d dz = _mm256_sub_pd(_mm256_loadu_pd(zs + i), qz);
    return _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy)), _mm256_mul_pd(dz, dz));
}

void squared_distances_avx2(const double* xs, const double* ys, const double* zs, std::size_t n, double qx,
                            double qy, double qz, double* out)
{
    const __m256d qxv = _mm256_set1_pd(qx);
    const __m256d qyv = _mm256_set1_pd(qy);
    const __m256d qzv = _mm256_set1_pd(qz);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, squared_distance4(xs, ys, zs, i, qxv, qyv, qzv));
    for (; i < n; ++i)
    {
        const double dx = xs[i] - qx;
        const double dy = ys[i] - qy;
        const double dz = zs[i] - qz;
        out[i] = dx * dx + dy * dy + dz * dz;
    }
}

NearestHit nearest_avx2(const double* xs, const double* ys, const double* zs, std::size_t n, double qx,
                        double qy, double qz)
{
    const __m256d qxv = _mm256_set1_pd(qx);
    const __m256d qyv = _mm256_set1_pd(qy);
    const __m256d qzv = _mm256_set1_pd(qz);

    // Per-lane running minimum; strict < keeps the earliest index in each lane.
    __m256d best = _mm256_set1_pd(INFINITY);
    __m256d best_idx = _mm256_setzero_pd();
    __m256d idx = _mm256_setr_pd(0.0, 1.0, 2.0, 3.0);
    const __m256d four = _mm256_set1_pd(4.0);

    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
    {
        const __m256d d = squared_distance4(xs, ys, zs, i, qxv, qyv, qzv);
        const __m256d lt = _mm256_cmp_pd(d, best, _CMP_LT_OQ);
        best = _mm256_blendv_pd(best, d, lt);
        best_idx = _mm256_blendv_pd(best_idx, idx, lt);
        idx = _mm256_add_pd(idx, four);
    }

    alignas(32) double lane_d[4];
    alignas(32) double lane_i[4];
    _mm256_store_pd(lane_d, best);
    _mm256_store_pd(lane_i, best_idx);

    NearestHit hit{INFINITY, 0};
    for (int l = 0; l < 4; ++l)
    {
        const auto li = static_cast<std::size_t>(lane_i[l]);
        if (lane_d[l] < hit.squared_distance || (lane_d[l] == hit.squared_distance && li < hit.index))
            hit = {lane_d[l], li};
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

double sum_abs_diff_avx2(const double* a, const double* b, std::size_t n)
{
    const __m256d sign = _mm256_set1_pd(-0.0);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
    {
        const __m256d diff = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_add_pd(acc, _mm256_andnot_pd(sign, diff));
    }
    alignas(32) double s[4];
    _mm256_store_pd(s, acc);
    for (; i < n; ++i)
        s[i % 4] += std::fabs(a[i] - b[i]);
    return (s[0] + s[1]) + (s[2] + s[3]);
}

} // namespace

const KernelTable& avx2_table()
{
    static const KernelTable table{"avx2", accumulate_columns_avx2, squared_distances_avx2, nearest_avx2,
                                   sum_abs_diff_avx2};
    return table;
}

} // namespace headfit::simd
