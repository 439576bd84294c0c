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

#include <cstdlib>
#include <string_view>

namespace headfit::simd {

#if defined(HEADFIT_HAVE_AVX2)
const KernelTable& avx2_table();
#endif
#if defined(HEADFIT_HAVE_NEON)
const KernelTable& neon_table();
#endif

const KernelTable* avx2_kernels()
{
#if defined(HEADFIT_HAVE_AVX2)
    static const bool supported = __builtin_cpu_supports("avx2");
    return supported ? &avx2_table() : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable* neon_kernels()
{
#if defined(HEADFIT_HAVE_NEON)
    return &neon_table();
#else
    return nullptr;
#endif
}

const KernelTable& active_kernels()
{
    static const KernelTable& selected = []() -> const KernelTable& {
        const char* env = std::getenv("HEADFIT_SIMD");
        if (env != nullptr && std::string_view(env) == "scalar")
            return scalar_kernels();
        if (const KernelTable* t = avx2_kernels())
            return *t;
        if (const KernelTable* t = neon_kernels())
            return *t;
        return scalar_kernels();
    }();
    return selected;
}

} // namespace headfit::simd
