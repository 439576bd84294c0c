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
#include "headfit/error.hpp"
#include "headfit/spatial.hpp"

#include "support/generators.hpp"
#include "support/oracles.hpp"

#include "doctest.h"

#include <algorithm>

using namespace headfit;
using headfit::testing::Gen;

TEST_CASE("kd-tree nearest equals the brute-force scan")
{
    Gen gen(81);
    for (int t = 0; t < 30; ++t)
    {
        const int n = gen.integer(1, 400);
        const Vertices pts = gen.cloud(n);
        const KdTree tree(pts, static_cast<std::size_t>(gen.integer(1, 32)));
        for (int q = 0; q < 50; ++q)
        {
            const Eigen::Vector3d query = gen.vec3(-1.5, 1.5);
            const auto [idx, d] = oracle::nearest(pts, query);
            const Neighbor hit = tree.nearest(query);
            CHECK(hit.index == static_cast<std::size_t>(idx));
            CHECK(hit.squared_distance == d);
        }
    }
}

TEST_CASE("kd-tree resolves exact ties to the lowest index")
{
    // A lattice gives many equidistant candidates.
    Vertices pts(27, 3);
    int k = 0;
    for (int x = -1; x <= 1; ++x)
        for (int y = -1; y <= 1; ++y)
            for (int z = -1; z <= 1; ++z)
                pts.row(k++) << x, y, z;
    // Reverse the order so the lowest index is not the first one built.
    const Vertices rev = pts.colwise().reverse();
    for (std::size_t leaf : {1u, 2u, 4u, 64u})
    {
        const KdTree tree(rev, leaf);
        for (int q = 0; q < 27; ++q)
        {
            const Eigen::Vector3d mid = rev.row(q).transpose() * 0.5;
            const auto [idx, d] = oracle::nearest(rev, mid);
            CHECK(tree.nearest(mid).index == static_cast<std::size_t>(idx));
        }
    }
}

TEST_CASE("k-nearest is ordered by distance then index and honours the exclusion")
{
    Gen gen(82);
    for (int t = 0; t < 20; ++t)
    {
        const int n = gen.integer(10, 300);
        const Vertices pts = gen.cloud(n);
        const KdTree tree(pts);
        const int k = gen.integer(1, n - 1);
        const int self = gen.integer(0, n - 1);
        const auto got = tree.k_nearest(pts.row(self).transpose(), static_cast<std::size_t>(k),
                                        static_cast<std::size_t>(self));
        std::vector<std::pair<double, int>> all;
        for (int j = 0; j < n; ++j)
            if (j != self)
                all.emplace_back(oracle::squared_distance(pts.row(self).transpose(), pts.row(j).transpose()), j);
        std::sort(all.begin(), all.end());
        REQUIRE(got.size() == static_cast<std::size_t>(k));
        for (int i = 0; i < k; ++i)
        {
            CHECK(got[static_cast<std::size_t>(i)].index == static_cast<std::size_t>(all[static_cast<std::size_t>(i)].second));
            CHECK(got[static_cast<std::size_t>(i)].squared_distance == all[static_cast<std::size_t>(i)].first);
        }
    }
}

TEST_CASE("k-nearest with k beyond the point count returns everything")
{
    Gen gen(83);
    const Vertices pts = gen.cloud(5);
    const KdTree tree(pts);
    CHECK(tree.k_nearest(Eigen::Vector3d::Zero(), 10).size() == 5);
    CHECK(tree.k_nearest(Eigen::Vector3d::Zero(), 10, 2).size() == 4);
}

TEST_CASE("closest point on a triangle: interior, edge and vertex regions")
{
    const Eigen::Vector3d a(0, 0, 0), b(1, 0, 0), c(0, 1, 0);
    // Perpendicular above the interior.
    CHECK((closest_point_on_triangle({0.2, 0.2, 0.7}, a, b, c) - Eigen::Vector3d(0.2, 0.2, 0)).norm() < 1e-15);
    // Beyond edge ab.
    CHECK((closest_point_on_triangle({0.5, -1, 0.3}, a, b, c) - Eigen::Vector3d(0.5, 0, 0)).norm() < 1e-15);
    // Beyond the hypotenuse.
    CHECK((closest_point_on_triangle({1, 1, 0}, a, b, c) - Eigen::Vector3d(0.5, 0.5, 0)).norm() < 1e-15);
    // Vertex regions.
    CHECK((closest_point_on_triangle({-1, -1, 2}, a, b, c) - a).norm() < 1e-15);
    CHECK((closest_point_on_triangle({3, -0.5, 0}, a, b, c) - b).norm() < 1e-15);
    CHECK((closest_point_on_triangle({-0.5, 3, 0}, a, b, c) - c).norm() < 1e-15);
}

TEST_CASE("closest point on a triangle matches the reference distance")
{
    Gen gen(84);
    for (int t = 0; t < 2000; ++t)
    {
        const Eigen::Vector3d a = gen.vec3(), b = gen.vec3(), c = gen.vec3(), p = gen.vec3(-2, 2);
        const double got = (closest_point_on_triangle(p, a, b, c) - p).norm();
        CHECK(got == doctest::Approx(oracle::point_triangle_distance(p, a, b, c)).epsilon(1e-9).scale(1e-9));
    }
}

TEST_CASE("degenerate triangles reduce to segments and points")
{
    const Eigen::Vector3d a(0, 0, 0), b(2, 0, 0);
    CHECK((closest_point_on_triangle({1, 1, 0}, a, b, a) - Eigen::Vector3d(1, 0, 0)).norm() < 1e-15);
    CHECK((closest_point_on_triangle({1, 1, 1}, a, a, a) - a).norm() < 1e-15);
    CHECK((closest_point_on_triangle({1, 1, 0}, a, b, Eigen::Vector3d(1, 0, 0)) - Eigen::Vector3d(1, 0, 0)).norm() <
          1e-15);
}

TEST_CASE("BVH closest point equals the all-triangles scan")
{
    Gen gen(85);
    const HeadModel m = synth_model(4, 200, 2, 2);
    const TriangleBvh bvh(m.template_vertices, m.faces);
    for (int q = 0; q < 300; ++q)
    {
        const Eigen::Vector3d p = gen.vec3(-1.5, 1.5);
        double best = 1e300;
        for (const auto& f : m.faces)
            best = std::min(best, oracle::point_triangle_distance(p, m.template_vertices.row(f[0]).transpose(),
                                                                  m.template_vertices.row(f[1]).transpose(),
                                                                  m.template_vertices.row(f[2]).transpose()));
        const ClosestPoint hit = bvh.closest(p);
        CHECK(std::sqrt(hit.squared_distance) == doctest::Approx(best).epsilon(1e-9).scale(1e-9));
        CHECK((hit.point - p).squaredNorm() == doctest::Approx(hit.squared_distance).epsilon(1e-12));
    }
    CHECK_THROWS_AS(TriangleBvh(m.template_vertices, Faces{}), Error);
}
