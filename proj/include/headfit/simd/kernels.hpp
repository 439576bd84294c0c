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

#include <cstddef>

// Data-parallel inner loops. Every kernel has a scalar reference version and,
// where the target supports it, an AVX2 (x86-64) or NEON (aarch64) variant
// that is selected once at runtime. Variants perform the same floating-point
// operations in the same order per element (no FMA contraction), so their
// results are bit-identical to the scalar reference.
//
// Signatures use raw pointers on purpose: the SIMD translation units are built
// with ISA-specific flags and must not instantiate shared inline templates.

namespace headfit::simd {

struct NearestHit
{
    double squared_distance;
    std::size_t index; // lowest index among equal minima
};

struct KernelTable
{
    const char* name;

    /// out[r] += sum_c columns[c * rows + r] * coeffs[c], columns stored column-major.
    /// Coefficients are applied one column at a time, in increasing c.
    void (*accumulate_columns)(double* out, const double* columns, std::size_t rows,
                               const double* coeffs, std::size_t cols);

    /// out[i] = (xs[i]-qx)^2 + (ys[i]-qy)^2 + (zs[i]-qz)^2, evaluated left to right.
    void (*squared_distances)(const double* xs, const double* ys, const double* zs, std::size_t n,
                              double qx, double qy, double qz, double* out);

    /// Minimum of squared_distances over [0, n). Requires n > 0.
    NearestHit (*nearest)(const double* xs, const double* ys, const double* zs, std::size_t n,
                          double qx, double qy, double qz);

    /// sum_i |a[i] - b[i]|, accumulated in four interleaved partial sums
    /// (lane i % 4) that are combined as (s0 + s1) + (s2 + s3).
    double (*sum_abs_diff)(const double* a, const double* b, std::size_t n);
};

const KernelTable& scalar_kernels();

/// nullptr when the variant was not compiled in or the CPU lacks the ISA.
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();

/// The table used by the library. Picks the widest supported variant unless
/// the environment variable HEADFIT_SIMD is set to "scalar".
const KernelTable& active_kernels();

} // namespace headfit::simd
