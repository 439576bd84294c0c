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
#include "headfit/morphable.hpp"
#include "headfit/rotations.hpp"

#include "support/generators.hpp"

#include "doctest.h"

#include <set>

using namespace headfit;
using headfit::testing::Gen;

namespace {

const HeadModel& small_model()
{
    static const HeadModel m = synth_model(3, 400, 8, 4);
    return m;
}

Eigen::Vector3d row(const Vertices& v, int i)
{
    return v.row(i).transpose();
}

} // namespace

TEST_CASE("canonical synthetic model has the expected counts")
{
    const HeadModel m = synth_model(1, kCanonicalVertexCount, 20, 10);
    CHECK(m.vertex_count() == 5023);
    CHECK(m.subset(subset_names::head).size() == 3669);
    CHECK(m.subset(subset_names::landmark68).size() == 68);
    CHECK(m.subset(subset_names::landmark191).size() == 191);
    CHECK(m.subset(subset_names::landmark445).size() == 445);
    CHECK(m.subset(subset_names::keypoint7).size() == 7);
    CHECK(m.subset(subset_names::full).size() == 5023);
    CHECK(m.synthetic_subsets);
    CHECK(check_invariants(m).empty());
}

TEST_CASE("synthetic model is deterministic per seed")
{
    const HeadModel a = synth_model(5, 300, 6, 3);
    const HeadModel b = synth_model(5, 300, 6, 3);
    const HeadModel c = synth_model(6, 300, 6, 3);
    CHECK(a.template_vertices == b.template_vertices);
    CHECK(a.shape_basis == b.shape_basis);
    CHECK(a.expr_basis == b.expr_basis);
    CHECK(a.subsets == b.subsets);
    CHECK(a.shape_basis != c.shape_basis);
}

TEST_CASE("synthetic model rejects invalid counts")
{
    CHECK_THROWS_AS(synth_model(1, 10, 5, 5), Error);
    CHECK_THROWS_AS(synth_model(1, 100, 0, 5), Error);
    CHECK_THROWS_AS(synth_model(1, 100, 5, 0), Error);
}

TEST_CASE("subsets are unique, in range and nested where expected")
{
    const HeadModel& m = small_model();
    for (const auto& [name, ids] : m.subsets)
    {
        const std::set<int> unique(ids.begin(), ids.end());
        CHECK_MESSAGE(unique.size() == ids.size(), name);
        CHECK(*unique.begin() >= 0);
        CHECK(*unique.rbegin() < m.vertex_count());
    }
    const auto head = m.subset(subset_names::head);
    const std::set<int> head_set(head.begin(), head.end());
    for (int i : m.subset(subset_names::face))
        CHECK(head_set.count(i) == 1);
    CHECK_THROWS_AS(m.subset("nose-tip"), Error);
    CHECK_FALSE(m.has_subset("nose-tip"));
}

TEST_CASE("faces reference valid vertices and cover the surface")
{
    const HeadModel& m = small_model();
    CHECK(!m.faces.empty());
    std::set<int> used;
    for (const auto& f : m.faces)
        for (int i : f)
            used.insert(i);
    CHECK(static_cast<int>(used.size()) == m.vertex_count());
}

TEST_CASE("zero coefficients decode to the template")
{
    const HeadModel& m = small_model();
    const Mesh mesh = decode(m, ShapeParams::zeros(m));
    CHECK(mesh.vertices == m.template_vertices);
    CHECK(mesh.faces.size() == m.faces.size());
}

TEST_CASE("decode is linear in the coefficients without jaw rotation")
{
    Gen gen(31);
    const HeadModel& m = small_model();
    for (int t = 0; t < 10; ++t)
    {
        ShapeParams a = gen.shape(m, 1.0, 0.0);
        ShapeParams b = gen.shape(m, 1.0, 0.0);
        ShapeParams sum = ShapeParams::zeros(m);
        sum.beta = a.beta + b.beta;
        sum.psi = a.psi + b.psi;
        const Vertices da = decode(m, a).vertices - m.template_vertices;
        const Vertices db = decode(m, b).vertices - m.template_vertices;
        const Vertices ds = decode(m, sum).vertices - m.template_vertices;
        CHECK((ds - da - db).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("decode matches the explicit basis product")
{
    Gen gen(32);
    const HeadModel& m = small_model();
    const ShapeParams p = gen.shape(m, 1.0, 0.0);
    const Eigen::VectorXd flat = m.shape_basis * p.beta + m.expr_basis * p.psi;
    const Vertices v = decode(m, p).vertices;
    for (int i = 0; i < m.vertex_count(); ++i)
        for (int c = 0; c < 3; ++c)
            CHECK(v(i, c) == doctest::Approx(m.template_vertices(i, c) + flat(3 * i + c)).epsilon(1e-12));
}

TEST_CASE("jaw rotation moves only weighted vertices, about the joint")
{
    const HeadModel& m = small_model();
    ShapeParams p = ShapeParams::zeros(m);
    p.jaw = Eigen::Vector3d(0.3, 0.0, 0.0);
    const Vertices v = decode(m, p).vertices;
    for (int i = 0; i < m.vertex_count(); ++i)
    {
        const double w = m.jaw_weights(i);
        const Eigen::Vector3d expected =
            m.jaw_joint + rotation_vector_to_matrix(w * p.jaw) * (row(m.template_vertices, i) - m.jaw_joint);
        CHECK((row(v, i) - expected).norm() < 1e-12);
        if (w == 0.0)
            CHECK(row(v, i) == row(m.template_vertices, i));
    }
    CHECK((m.jaw_weights.array() > 0).any());
    CHECK((m.jaw_weights.array() == 0).any());
}

TEST_CASE("decode_vertex agrees with decode and with finite differences")
{
    Gen gen(33);
    const HeadModel& m = small_model();
    const int p_count = m.shape_count() + m.expr_count() + 3;
    for (int t = 0; t < 5; ++t)
    {
        const ShapeParams p = gen.shape(m, 1.0, 0.2);
        const Vertices v = decode(m, p).vertices;
        for (int i : {0, 17, 123, m.vertex_count() - 1})
        {
            Eigen::Matrix<double, 3, Eigen::Dynamic> j(3, p_count);
            const Eigen::Vector3d x = decode_vertex(m, p, i, j);
            CHECK((x - row(v, i)).norm() < 1e-12);
            const double h = 1e-6;
            for (int k = 0; k < p_count; ++k)
            {
                ShapeParams a = p, b = p;
                auto bump = [&](ShapeParams& q, double d) {
                    if (k < m.shape_count())
                        q.beta(k) += d;
                    else if (k < m.shape_count() + m.expr_count())
                        q.psi(k - m.shape_count()) += d;
                    else
                        q.jaw(k - m.shape_count() - m.expr_count()) += d;
                };
                bump(a, h);
                bump(b, -h);
                Eigen::Matrix<double, 3, Eigen::Dynamic> unused(3, p_count);
                const Eigen::Vector3d fd =
                    (decode_vertex(m, a, i, unused) - decode_vertex(m, b, i, unused)) / (2 * h);
                CHECK((fd - j.col(k)).norm() < 1e-7);
            }
        }
    }
}

TEST_CASE("dimension mismatches are reported")
{
    const HeadModel& m = small_model();
    ShapeParams p = ShapeParams::zeros(m);
    p.beta.resize(m.shape_count() + 1);
    p.beta.setZero();
    try
    {
        decode(m, p);
        FAIL("expected DimensionMismatch");
    }
    catch (const Error& e)
    {
        CHECK(e.code() == ErrorCode::DimensionMismatch);
    }
}

TEST_CASE("a unit coefficient moves no vertex by more than 5% of the extent")
{
    const HeadModel& m = small_model();
    const Eigen::Vector3d extent =
        m.template_vertices.colwise().maxCoeff() - m.template_vertices.colwise().minCoeff();
    const double limit = 0.05 * extent.maxCoeff() * (1.0 + 1e-9);
    for (const Eigen::MatrixXd* basis : {&m.shape_basis, &m.expr_basis})
    {
        for (Eigen::Index c = 0; c < basis->cols(); ++c)
        {
            double max_disp = 0.0;
            for (int i = 0; i < m.vertex_count(); ++i)
                max_disp = std::max(max_disp, basis->col(c).segment(3 * i, 3).norm());
            CHECK(max_disp <= limit);
            CHECK(max_disp > 0.0);
        }
    }
}

TEST_CASE("subsample picks rows in order and validates indices")
{
    const HeadModel& m = small_model();
    const std::vector<int> ids{5, 1, 5};
    const Vertices s = subsample(m.template_vertices, ids);
    CHECK(s.rows() == 3);
    CHECK(s.row(0) == m.template_vertices.row(5));
    CHECK(s.row(1) == m.template_vertices.row(1));
    const std::vector<int> bad{m.vertex_count()};
    CHECK_THROWS_AS(subsample(m.template_vertices, bad), Error);
    const Mesh mesh = decode(m, ShapeParams::zeros(m));
    CHECK(subsample(m, mesh, subset_names::landmark68).rows() == 68);
}

TEST_CASE("invariant checker flags broken models")
{
    HeadModel m = small_model();
    m.jaw_weights(0) = 2.0;
    m.subsets["head"].push_back(m.vertex_count());
    CHECK(check_invariants(m).size() == 2);
}
