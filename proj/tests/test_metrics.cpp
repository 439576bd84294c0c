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
#include "headfit/metrics.hpp"

#include "support/generators.hpp"
#include "support/oracles.hpp"
#include "support/scenarios.hpp"

#include "doctest.h"

#include <algorithm>
#include <functional>

using namespace headfit;
using namespace headfit::testing;

namespace {

ErrorCode code_of(const std::function<void()>& f)
{
    try
    {
        f();
    }
    catch (const Error& e)
    {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::InvalidArgument;
}

Vertices transform(const Vertices& v, const SimilarityTransform& t)
{
    return apply_similarity(v, t);
}

SimilarityTransform random_similarity(Gen& gen, bool with_scale)
{
    SimilarityTransform t;
    t.rotation = gen.rotation();
    t.scale = with_scale ? gen.uniform(0.3, 3.0) : 1.0;
    t.translation = gen.vec3(-2, 2);
    return t;
}

double alignment_residual(const Vertices& src, const Vertices& dst, bool with_scale)
{
    return (transform(src, rigid_align_keypoints(src, dst, with_scale)) - dst).squaredNorm();
}

const HeadModel& model()
{
    static const HeadModel m = synth_model(21, 600, 6, 3);
    return m;
}

} // namespace

// ---------------------------------------------------------------- NME

TEST_CASE("NME closed forms")
{
    Gen gen(91);
    const Points2D gt = gen.points2d(68, 0, 100);
    const BBox box{0, 0, 100, 100};
    CHECK(reprojection_nme(gt, gt, box) == 0.0);
    Points2D shifted = gt;
    shifted.col(0).array() += 3.0;
    shifted.col(1).array() += 4.0; // 5 px
    CHECK(reprojection_nme(shifted, gt, box) == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(reprojection_nme(shifted, gt, {0, 0, 50, 200}) == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("NME is invariant under joint similarity scaling")
{
    Gen gen(92);
    for (int t = 0; t < 50; ++t)
    {
        const Points2D a = gen.points2d(68, 0, 300), b = gen.points2d(68, 0, 300);
        const BBox box{gen.uniform(0, 10), gen.uniform(0, 10), gen.uniform(50, 200), gen.uniform(50, 200)};
        const double k = gen.uniform(0.1, 10);
        const BBox scaled{k * box.x, k * box.y, k * box.w, k * box.h};
        CHECK(reprojection_nme(k * a, k * b, scaled) == doctest::Approx(reprojection_nme(a, b, box)).epsilon(1e-12));
    }
}

TEST_CASE("NME input errors")
{
    Gen gen(93);
    CHECK(code_of([&] { reprojection_nme(gen.points2d(68, 0, 1), gen.points2d(67, 0, 1), {0, 0, 1, 1}); }) ==
          ErrorCode::DimensionMismatch);
    CHECK(code_of([&] { reprojection_nme(gen.points2d(68, 0, 1), gen.points2d(68, 0, 1), {0, 0, 0, 1}); }) ==
          ErrorCode::DegenerateInput);
}

// ---------------------------------------------------------------- Z_n

TEST_CASE("Z_n of identical meshes is one for every n")
{
    Gen gen(94);
    const Vertices v = gen.cloud(120);
    for (int n : {1, 2, 5, 10, 50, 119})
        CHECK(zn_accuracy(v, v, n) == 1.0);
}

TEST_CASE("Z_n is zero when every depth is negated")
{
    Gen gen(95);
    const Vertices v = gen.cloud(100); // continuous draws, no z ties
    Vertices flipped = v;
    flipped.col(2) *= -1.0;
    CHECK(zn_accuracy(v, flipped, 5) == 0.0);
}

TEST_CASE("Z_n equals the brute-force oracle")
{
    Gen gen(96);
    for (int t = 0; t < 20; ++t)
    {
        const int k = gen.integer(10, 200);
        const Vertices gt = gen.cloud(k);
        Vertices pred = gt + 0.2 * gen.cloud(k);
        const int n = gen.integer(1, std::min(k - 1, 20));
        CHECK(zn_accuracy(gt, pred, n) == oracle::zn(gt, pred, n));
    }
}

TEST_CASE("Z_n only depends on depth order")
{
    Gen gen(97);
    const Vertices gt = gen.cloud(150);
    const Vertices pred = gt + 0.3 * gen.cloud(150);
    const double base = zn_accuracy(gt, pred, 5);
    Vertices warped_pred = pred;
    warped_pred.col(2) = (pred.col(2).array() * 3.0).exp() + 7.0;
    CHECK(zn_accuracy(gt, warped_pred, 5) == base);
    Vertices moved_pred = pred;
    moved_pred.leftCols(2) = gen.cloud(150).leftCols(2);
    CHECK(zn_accuracy(gt, moved_pred, 5) == base);
}

TEST_CASE("Z_n input errors")
{
    Gen gen(98);
    const Vertices v = gen.cloud(10);
    CHECK(code_of([&] { zn_accuracy(v, gen.cloud(11), 5); }) == ErrorCode::DimensionMismatch);
    CHECK(code_of([&] { zn_accuracy(v, v, 0); }) == ErrorCode::InvalidN);
    CHECK(code_of([&] { zn_accuracy(v, v, 10); }) == ErrorCode::InvalidN);
}

// ---------------------------------------------------------------- alignment

TEST_CASE("alignment of identical sets is the identity")
{
    Gen gen(99);
    const Vertices v = gen.cloud(7);
    const SimilarityTransform t = rigid_align_keypoints(v, v);
    CHECK(t.rotation == RotationMatrix::Identity());
    CHECK(t.scale == 1.0);
    CHECK(t.translation == Eigen::Vector3d::Zero());
}

TEST_CASE("alignment recovers a known transform")
{
    Gen gen(100);
    for (bool with_scale : {false, true})
    {
        for (int t = 0; t < 30; ++t)
        {
            const Vertices src = gen.cloud(7);
            const SimilarityTransform truth = random_similarity(gen, with_scale);
            const SimilarityTransform got = rigid_align_keypoints(src, transform(src, truth), with_scale);
            CHECK((got.rotation - truth.rotation).norm() < 1e-8);
            CHECK(got.scale == doctest::Approx(truth.scale).epsilon(1e-8));
            CHECK((got.translation - truth.translation).norm() < 1e-8);
        }
    }
}

TEST_CASE("alignment matches the independent Kabsch solution")
{
    Gen gen(101);
    for (bool with_scale : {false, true})
    {
        for (int t = 0; t < 30; ++t)
        {
            const Vertices src = gen.cloud(7);
            const Vertices dst = gen.cloud(7);
            const SimilarityTransform a = rigid_align_keypoints(src, dst, with_scale);
            const SimilarityTransform b = oracle::align(src, dst, with_scale);
            CHECK((a.rotation - b.rotation).norm() < 1e-9);
            CHECK(a.scale == doctest::Approx(b.scale).epsilon(1e-9));
            CHECK((a.translation - b.translation).norm() < 1e-9);
        }
    }
}

TEST_CASE("a mirrored correspondence still yields a proper rotation")
{
    Vertices src(4, 3);
    src << 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1;
    Vertices dst = src;
    dst.col(0) *= -1.0;
    const SimilarityTransform t = rigid_align_keypoints(src, dst);
    CHECK(is_rotation(t.rotation));
    CHECK(alignment_residual(src, dst, false) > 1e-3);
}

TEST_CASE("alignment residual is invariant under a common rigid motion")
{
    Gen gen(102);
    for (int t = 0; t < 30; ++t)
    {
        const Vertices src = gen.cloud(7), dst = gen.cloud(7);
        const SimilarityTransform motion = random_similarity(gen, false);
        CHECK(alignment_residual(transform(src, motion), transform(dst, motion), false) ==
              doctest::Approx(alignment_residual(src, dst, false)).epsilon(1e-9));
    }
}

TEST_CASE("collinear or too few keypoints are degenerate")
{
    Vertices line(4, 3);
    line << 0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3;
    Gen gen(103);
    CHECK(code_of([&] { rigid_align_keypoints(line, gen.cloud(4)); }) == ErrorCode::DegenerateConfiguration);
    CHECK(code_of([&] { rigid_align_keypoints(gen.cloud(4), line); }) == ErrorCode::DegenerateConfiguration);
    CHECK(code_of([&] { rigid_align_keypoints(gen.cloud(2), gen.cloud(2)); }) ==
          ErrorCode::DegenerateConfiguration);
    CHECK(code_of([&] { rigid_align_keypoints(gen.cloud(3), gen.cloud(4)); }) == ErrorCode::DimensionMismatch);
}

// ---------------------------------------------------------------- Chamfer

TEST_CASE("Chamfer is zero when the prediction contains the ground truth")
{
    Gen gen(104);
    const Vertices gt = gen.cloud(50);
    Vertices pred(80, 3);
    pred << gt, gen.cloud(30);
    const Vertices kp = gt.topRows(7);
    CHECK(chamfer_one_sided(gt, pred, kp, kp) == 0.0);
}

TEST_CASE("Chamfer equals the brute-force oracle")
{
    Gen gen(105);
    for (bool with_scale : {false, true})
    {
        for (int t = 0; t < 20; ++t)
        {
            const Vertices gt = gen.cloud(gen.integer(1, 200));
            const Vertices pred = gen.cloud(gen.integer(1, 200));
            const Vertices gt_kp = gen.cloud(7), pred_kp = gen.cloud(7);
            CHECK(std::abs(chamfer_one_sided(gt, pred, gt_kp, pred_kp, with_scale) -
                           oracle::chamfer(gt, pred, gt_kp, pred_kp, with_scale)) <= 1e-9);
        }
    }
}

TEST_CASE("Chamfer never increases when predicted points are added")
{
    Gen gen(106);
    const Vertices gt = gen.cloud(60), kp = gen.cloud(7);
    Vertices pred = gen.cloud(40);
    double prev = chamfer_one_sided(gt, pred, kp, kp);
    CHECK(prev >= 0.0);
    for (int t = 0; t < 10; ++t)
    {
        Vertices more(pred.rows() + 5, 3);
        more << pred, gen.cloud(5, -3, 3);
        pred = more;
        const double next = chamfer_one_sided(gt, pred, kp, kp);
        CHECK(next <= prev);
        prev = next;
    }
}

// ---------------------------------------------------------------- scan to mesh

TEST_CASE("scan-to-mesh is zero for points sampled on the surface")
{
    Gen gen(107);
    const HeadModel m = synth_model(5, 150, 2, 2);
    const Mesh mesh{m.template_vertices, m.faces};
    Vertices scan(100, 3);
    for (int i = 0; i < 100; ++i)
    {
        const auto& f = m.faces[static_cast<std::size_t>(gen.integer(0, static_cast<int>(m.faces.size()) - 1))];
        double u = gen.uniform(), v = gen.uniform();
        if (u + v > 1)
        {
            u = 1 - u;
            v = 1 - v;
        }
        scan.row(i) = m.template_vertices.row(f[0]) + u * (m.template_vertices.row(f[1]) - m.template_vertices.row(f[0])) +
                      v * (m.template_vertices.row(f[2]) - m.template_vertices.row(f[0]));
    }
    const Vertices kp = subsample(m.template_vertices, m.subset(subset_names::keypoint7));
    const DistanceStats s = scan_to_mesh(scan, mesh, kp, kp);
    CHECK(s.count == 100);
    CHECK(s.rmse < 1e-12);
    CHECK(s.median < 1e-12);
}

TEST_CASE("a point above a triangle is at its height")
{
    Mesh mesh;
    mesh.vertices.resize(4, 3);
    mesh.vertices << 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 5;
    mesh.faces = {{0, 1, 2}};
    Vertices scan(1, 3);
    scan << 0.25, 0.25, 0.375;
    const DistanceStats s = scan_to_mesh(scan, mesh, mesh.vertices, mesh.vertices);
    CHECK(s.mean == doctest::Approx(0.375).epsilon(1e-15));
    CHECK(s.std == 0.0);
}

TEST_CASE("scan-to-mesh statistics equal the all-triangles oracle")
{
    Gen gen(108);
    const HeadModel m = synth_model(6, 100, 2, 2);
    for (bool with_scale : {false, true})
    {
        for (int t = 0; t < 20; ++t)
        {
            const Vertices scan = gen.cloud(gen.integer(1, 200), -1.2, 1.2);
            const Mesh mesh{m.template_vertices + 0.05 * gen.cloud(m.vertex_count()), m.faces};
            const Vertices scan_kp = gen.cloud(7), mesh_kp = gen.cloud(7);
            const DistanceStats got = scan_to_mesh(scan, mesh, scan_kp, mesh_kp, with_scale);
            const DistanceStats want =
                distance_stats(oracle::scan_distances(scan, mesh.vertices, mesh.faces, scan_kp, mesh_kp, with_scale));
            CHECK(std::abs(got.mean - want.mean) <= 1e-9);
            CHECK(std::abs(got.median - want.median) <= 1e-9);
            CHECK(std::abs(got.rmse - want.rmse) <= 1e-9);
            CHECK(std::abs(got.std - want.std) <= 1e-9);
        }
    }
    const Mesh no_faces{m.template_vertices, {}};
    const Vertices kp = gen.cloud(7);
    CHECK(code_of([&] { scan_to_mesh(gen.cloud(3), no_faces, kp, kp); }) == ErrorCode::NoFaces);
}

TEST_CASE("distance statistics closed forms")
{
    const DistanceStats s = distance_stats({3, 1, 4, 2});
    CHECK(s.median == 2.5);
    CHECK(s.mean == 2.5);
    CHECK(s.rmse == doctest::Approx(std::sqrt(30.0 / 4)));
    CHECK(s.std == doctest::Approx(std::sqrt(1.25)));
    CHECK(distance_stats({7}).median == 7);
    CHECK(distance_stats({}).count == 0);
}

// ---------------------------------------------------------------- quality score

namespace {

LabeledImage random_image(Gen& gen, int annotators)
{
    LabeledImage image;
    image.image_id = "img";
    image.bbox = {0, 0, gen.uniform(50, 150), gen.uniform(50, 150)};
    const Points2D base = gen.points2d(68, 0, 100);
    for (int a = 0; a < annotators; ++a)
        image.labels.push_back({"a" + std::to_string(a), base + gen.points2d(68, -3, 3)});
    return image;
}

double direct_quality(const LabeledImage& image, bool literal)
{
    double sum = 0.0;
    int pairs = 0;
    for (std::size_t i = 0; i < image.labels.size(); ++i)
        for (std::size_t j = 0; j < image.labels.size(); ++j)
        {
            if (j <= i)
                continue;
            const Points2D d = image.labels[i].landmarks - image.labels[j].landmarks;
            double dist = 0.0;
            if (literal)
            {
                for (Eigen::Index r = 0; r < d.rows(); ++r)
                    dist += d(r, 0) * d(r, 0) + d(r, 1) * d(r, 1);
                dist = std::sqrt(dist);
            }
            else
            {
                for (Eigen::Index r = 0; r < d.rows(); ++r)
                    dist += std::hypot(d(r, 0), d(r, 1));
                dist /= static_cast<double>(d.rows());
            }
            sum += dist;
            ++pairs;
        }
    return sum / pairs / std::sqrt(image.bbox.w * image.bbox.h);
}

} // namespace

TEST_CASE("quality score closed forms")
{
    Gen gen(109);
    LabeledImage same = random_image(gen, 1);
    same.labels.push_back(same.labels[0]);
    same.labels.push_back(same.labels[0]);
    CHECK(quality_score({same}) == 0.0);

    LabeledImage two = random_image(gen, 1);
    two.bbox = {0, 0, 80, 125}; // size 100
    Points2D offset = two.labels[0].landmarks;
    offset.col(0).array() += 6.0;
    offset.col(1).array() -= 8.0;
    two.labels.push_back({"b", offset});
    CHECK(quality_score({two}) == doctest::Approx(10.0 / 100.0).epsilon(1e-12));
}

TEST_CASE("quality score equals direct summation")
{
    Gen gen(110);
    for (bool literal : {false, true})
    {
        std::vector<LabeledImage> images;
        double expected = 0.0;
        for (int i = 0; i < 5; ++i)
        {
            images.push_back(random_image(gen, gen.integer(2, 6)));
            expected += direct_quality(images.back(), literal);
        }
        expected /= 5.0;
        const auto mode = literal ? PairDistance::ConcatenatedNorm : PairDistance::MeanPerLandmark;
        CHECK(quality_score(images, mode) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("quality score ignores annotator order and common translation")
{
    Gen gen(111);
    for (int t = 0; t < 20; ++t)
    {
        LabeledImage image = random_image(gen, 5);
        const double base = image_quality_score(image);
        std::shuffle(image.labels.begin(), image.labels.end(), gen.engine());
        CHECK(image_quality_score(image) == doctest::Approx(base).epsilon(1e-12));
        const Eigen::RowVector2d shift(gen.uniform(-50, 50), gen.uniform(-50, 50));
        for (auto& l : image.labels)
            l.landmarks.rowwise() += shift;
        CHECK(image_quality_score(image) == doctest::Approx(base).epsilon(1e-9));
    }
}

TEST_CASE("quality score input errors")
{
    Gen gen(112);
    CHECK(code_of([&] { quality_score({random_image(gen, 1)}); }) == ErrorCode::TooFewAnnotators);
    LabeledImage uneven = random_image(gen, 2);
    uneven.labels[1].landmarks = uneven.labels[1].landmarks.topRows(60).eval();
    CHECK(code_of([&] { quality_score({uneven}); }) == ErrorCode::DimensionMismatch);
    CHECK(code_of([&] { quality_score({}); }) == ErrorCode::InvalidArgument);
}

// ---------------------------------------------------------------- Euler MAE

TEST_CASE("Euler MAE closed forms")
{
    std::vector<EulerAngles> gt{{10, 20, 30}, {-170, 5, 0}};
    CHECK(euler_mae(gt, gt).mae == 0.0);
    auto pred = gt;
    for (auto& e : pred)
        e.yaw += 5.0;
    const EulerMae m = euler_mae(pred, gt);
    CHECK(m.yaw == doctest::Approx(5.0));
    CHECK(m.pitch == 0.0);
    CHECK(m.roll == 0.0);
    CHECK(m.mae == doctest::Approx(5.0 / 3.0));
    CHECK(euler_mae({{359, 0, 0}}, {{1, 0, 0}}).yaw == doctest::Approx(2.0));
    CHECK(euler_mae({{-179, 0, 0}}, {{179, 0, 0}}).yaw == doctest::Approx(2.0));
    CHECK(code_of([&] { euler_mae(gt, {gt[0]}); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("gimbal-locked triplets: zero matrix error, positive Euler MAE")
{
    const EulerAngles a{0, 90, 0}, b{90, 90, 90};
    CHECK(pose_error_frobenius(euler_to_matrix(a), euler_to_matrix(b)) == 0.0);
    CHECK(euler_mae({a}, {b}).mae > 0.0);
}

// ---------------------------------------------------------------- benchmark report

namespace {

BenchmarkSample sample(Gen& gen, const std::string& id, double pred_noise, const std::string& pose,
                       const std::string& quality)
{
    const FitParams truth = gen.params(model(), 1.0);
    BenchmarkSample s;
    s.id = id;
    s.gt = make_annotation(model(), truth, {512, 512});
    set_attribute(s.gt.attributes, "pose", pose);
    set_attribute(s.gt.attributes, "quality", quality);
    FitParams pred = truth;
    pred.shape.beta += gen.vector(model().shape_count(), pred_noise);
    pred.rotation = matrix_to_six_d(rotation_vector_to_matrix(gen.gaussian3(pred_noise * 0.1)) *
                                    six_d_to_matrix(truth.rotation));
    pred.translation += Eigen::Vector3d(gen.normal(0, 5 * pred_noise), gen.normal(0, 5 * pred_noise), 0);
    s.prediction = make_annotation(model(), pred, {512, 512});
    return s;
}

} // namespace

TEST_CASE("a perfect prediction scores zero error and full depth accuracy")
{
    Gen gen(113);
    BenchmarkSample s = sample(gen, "x", 0.0, "front", "high");
    s.prediction = s.gt;
    const SampleMetrics m = evaluate_sample(model(), s.gt, *s.prediction);
    CHECK(m.nme == 0.0);
    CHECK(m.zn == 1.0);
    CHECK(m.chamfer == 0.0);
    CHECK(m.pose_frob == 0.0);
    CHECK(m.pose_angle == 0.0);
}

TEST_CASE("single-sample report: overall equals the sample")
{
    Gen gen(114);
    const MetricReport r = benchmark_report(model(), {sample(gen, "only", 0.5, "side", "low")}, {5, false, {"pose"}, 1});
    REQUIRE(r.samples.size() == 1);
    const SampleMetrics& s = r.samples[0];
    CHECK(r.overall.count == 1);
    CHECK(r.overall.nme == s.nme);
    CHECK(r.overall.zn == s.zn);
    CHECK(r.overall.chamfer == s.chamfer);
    CHECK(r.overall.pose_frob == s.pose_frob);
    const MetricAggregate& g = r.subgroups.at("pose").at("side");
    CHECK(g.nme == s.nme);
    CHECK(g.count == 1);
}

TEST_CASE("subgroup means combine into the overall mean")
{
    Gen gen(115);
    std::vector<BenchmarkSample> samples;
    const char* poses[] = {"front", "side", "atypical"};
    for (int i = 0; i < 9; ++i)
        samples.push_back(sample(gen, "s" + std::to_string(i), 0.3 + 0.1 * i, poses[i % 3], i < 4 ? "high" : "low"));
    BenchmarkOptions options;
    options.subgroup_keys = {"pose", "quality"};
    options.threads = 3;
    const MetricReport r = benchmark_report(model(), samples, options);
    for (const auto& key : options.subgroup_keys)
    {
        double weighted = 0.0;
        std::size_t count = 0;
        for (const auto& [value, agg] : r.subgroups.at(key))
        {
            weighted += agg.nme * static_cast<double>(agg.count);
            count += agg.count;
            // Hand sum over the members.
            double sum = 0.0;
            std::size_t n = 0;
            for (const auto& s : r.samples)
                if (s.attributes.at(key) == value)
                {
                    sum += s.chamfer;
                    ++n;
                }
            CHECK(agg.chamfer == doctest::Approx(sum / static_cast<double>(n)).epsilon(1e-12));
        }
        CHECK(count == 9);
        CHECK(weighted / 9.0 == doctest::Approx(r.overall.nme).epsilon(1e-12));
    }
    CHECK(r.subgroups.at("pose").size() == 3);
}

TEST_CASE("reports are independent of thread count and input order")
{
    Gen gen(116);
    std::vector<BenchmarkSample> samples;
    for (int i = 0; i < 6; ++i)
        samples.push_back(sample(gen, "s" + std::to_string(i), 0.5, i % 2 ? "front" : "side", "high"));
    BenchmarkOptions one{5, false, {"pose"}, 1};
    BenchmarkOptions many{5, false, {"pose"}, 4};
    const MetricReport a = benchmark_report(model(), samples, one);
    std::reverse(samples.begin(), samples.end());
    const MetricReport b = benchmark_report(model(), samples, many);
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i)
    {
        CHECK(a.samples[i].id == b.samples[i].id);
        CHECK(a.samples[i].nme == b.samples[i].nme);
        CHECK(a.samples[i].chamfer == b.samples[i].chamfer);
    }
    CHECK(a.overall.nme == b.overall.nme);
}

TEST_CASE("failed samples are reported and excluded from aggregates")
{
    Gen gen(117);
    std::vector<BenchmarkSample> samples{sample(gen, "a", 0.5, "front", "high"), sample(gen, "b", 0.5, "front", "high")};
    samples[1].prediction.reset();
    samples[1].failure = "could not parse";
    const MetricReport r = benchmark_report(model(), samples, {});
    CHECK(r.failed_count == 1);
    CHECK(r.samples[1].failed);
    CHECK(r.samples[1].failure == "could not parse");
    CHECK(r.overall.count == 1);
    CHECK(r.overall.nme == r.samples[0].nme);
}

TEST_CASE("Z_n is absent for predictions in another topology")
{
    Gen gen(118);
    BenchmarkSample s = sample(gen, "foreign", 0.5, "front", "high");
    Annotation& pred = *s.prediction;
    const auto lmk = model().subset(subset_names::landmark68);
    pred.landmarks2d = project_frustum(subsample(pred.vertices, lmk), pred.matrices, pred.image_size);
    pred.keypoints = subsample(pred.vertices, model().subset(subset_names::keypoint7));
    pred.vertices = pred.vertices.topRows(300).eval();
    const MetricReport r = benchmark_report(model(), {s}, {});
    REQUIRE_FALSE(r.samples[0].failed);
    CHECK_FALSE(r.samples[0].zn.has_value());
    CHECK_FALSE(r.overall.zn.has_value());
    CHECK(r.overall.zn_count == 0);
}

TEST_CASE("report errors: unknown keys and missing attributes")
{
    Gen gen(119);
    const auto s = sample(gen, "a", 0.5, "front", "high");
    CHECK(code_of([&] { benchmark_report(model(), {s}, {5, false, {"hair"}, 1}); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([&] { benchmark_report(model(), {s}, {5, false, {"age"}, 1}); }) == ErrorCode::MissingAttribute);
    auto lit = s;
    set_attribute(lit.gt.attributes, "lighting", "standard");
    const MetricReport r = benchmark_report(model(), {lit}, {5, false, {"illumination"}, 1});
    CHECK(r.subgroups.at("lighting").count("standard") == 1);
}
