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

#include "headfit/dataio.hpp"

#include "support/generators.hpp"
#include "support/scenarios.hpp"

#include <filesystem>
#include <string>

namespace headfit::testing {

/**
 * A ground-truth directory of `count` annotations (files sample-NNN.json)
 * with attribute cards cycling through pose, quality and lighting values,
 * plus the model at <dir>/model.hfm.
 */
inline void write_benchmark_fixture(const std::filesystem::path& dir, const HeadModel& model, int count,
                                    std::uint64_t seed)
{
    std::filesystem::create_directories(dir);
    save_model(model, dir / "model.hfm");
    Gen gen(seed);
    const char* poses[] = {"front", "side", "atypical"};
    const char* quality[] = {"high", "low"};
    const char* lighting[] = {"standard", "non-standard"};
    for (int i = 0; i < count; ++i)
    {
        FitParams params = gen.params(model, 1.0, 30.0);
        params.scale = gen.uniform(100, 200);
        params.translation = Eigen::Vector3d(gen.uniform(200, 300), gen.uniform(200, 300), 0);
        Annotation a = make_annotation(model, params, {512, 512});
        set_attribute(a.attributes, "pose", poses[i % 3]);
        set_attribute(a.attributes, "quality", quality[i % 2]);
        set_attribute(a.attributes, "lighting", lighting[(i / 2) % 2]);
        char name[32];
        std::snprintf(name, sizeof name, "sample-%03d.json", i);
        save_annotation(dir / name, a);
    }
}

} // namespace headfit::testing
