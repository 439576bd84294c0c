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
#include "headfit/camera.hpp"
#include "headfit/dataio.hpp"
#include "headfit/service.hpp"

#include "support/generators.hpp"
#include "support/scenarios.hpp"

#include "doctest.h"

#include <atomic>
#include <functional>
#include <set>
#include <thread>

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

const HeadModel& small_model()
{
    static const HeadModel m = synth_model(31, 400, 6, 3);
    return m;
}

const HeadModel& canonical_model()
{
    static const HeadModel m = synth_model(32, kCanonicalVertexCount, 8, 4);
    return m;
}

constexpr ImageSize kImage{512, 512};

PinMutation add(const Pin& pin)
{
    PinMutation m;
    m.pin = pin;
    return m;
}

/// Pins projected from a random head placed in the image.
std::vector<Pin> consistent_pins(Gen& gen, const HeadModel& model, int count)
{
    FitParams truth = gen.params(model, 0.5);
    truth.scale = 150.0;
    truth.translation = Eigen::Vector3d(256, 256, 0);
    return make_pins(gen, model, truth, pick_vertices(gen, model.vertex_count(), count), 0.0);
}

/// Every published snapshot must be internally consistent: residuals are the
/// fit's projections of exactly these pins, and the overlay is the fit's.
void check_snapshot(const HeadModel& model, const SessionState& s)
{
    REQUIRE(s.fit.per_pin_residuals.size() == s.pins.size());
    for (std::size_t i = 0; i < s.pins.size(); ++i)
    {
        const int v = s.pins[i].pin.vertex_id;
        const Points2D p = project_vertices(model, s.fit.params, std::vector<int>{v});
        const Eigen::Vector2d r = p.row(0).transpose() - s.pins[i].pin.pixel;
        CHECK((r - s.fit.per_pin_residuals[i]).norm() < 1e-9);
    }
    const Points2D overlay = project_vertices(model, s.fit.params, s.vertex_ids);
    CHECK((overlay - s.points).cwiseAbs().maxCoeff() < 1e-9);
}

} // namespace

TEST_CASE("models are listed and unknown ones rejected")
{
    AnnotationService service;
    service.add_model("small", small_model());
    const auto list = service.list_models();
    REQUIRE(list.size() == 1);
    CHECK(list[0].model_id == "small");
    CHECK(list[0].vertex_count == 400);
    CHECK(list[0].synthetic_subsets);
    CHECK(code_of([&] { service.model("nope"); }) == ErrorCode::UnknownModel);
    CHECK(code_of([&] { service.create_session("nope", kImage); }) == ErrorCode::UnknownModel);
    CHECK(code_of([&] { service.create_session("small", {0, 10}); }) == ErrorCode::InvalidArgument);
    HeadModel broken = small_model();
    broken.jaw_weights(0) = 2.0;
    CHECK_THROWS_AS(service.add_model("broken", broken), Error);
}

TEST_CASE("sessions get distinct ids and start at revision zero")
{
    AnnotationService service;
    service.add_model("small", small_model());
    const std::string a = service.create_session("small", kImage);
    const std::string b = service.create_session("small", kImage);
    CHECK(a != b);
    CHECK(service.session_count() == 2);
    const SessionState s = service.get_state(a);
    CHECK(s.revision == 0);
    CHECK(s.pins.empty());
    CHECK(s.vertex_ids.size() == 68);
    check_snapshot(small_model(), s);
    CHECK(service.close_session(a));
    CHECK_FALSE(service.close_session(a));
    CHECK(code_of([&] { service.get_state(a); }) == ErrorCode::UnknownSession);
    CHECK(code_of([&] { service.get_state(b, "ears"); }) == ErrorCode::UnknownSubset);
}

TEST_CASE("each accepted mutation increments the revision")
{
    Gen gen(1);
    AnnotationService service;
    service.add_model("small", small_model());
    const std::string id = service.create_session("small", kImage);
    const auto pins = consistent_pins(gen, small_model(), 4);
    for (std::size_t i = 0; i < pins.size(); ++i)
    {
        const MutationResult r = service.mutate_pins(id, add(pins[i]));
        CHECK(r.revision == i + 1);
        CHECK(r.pin_id == static_cast<int>(i) + 1);
    }
    PinMutation move;
    move.op = PinOp::Move;
    move.pin_id = 2;
    move.pin = pins[1];
    move.pin.pixel += Eigen::Vector2d(3, -2);
    CHECK(service.mutate_pins(id, move).revision == 5);
    CHECK(service.get_state(id).pins[1].pin.pixel == move.pin.pixel);

    PinMutation del;
    del.op = PinOp::Delete;
    del.pin_id = 3;
    CHECK(service.mutate_pins(id, del).revision == 6);
    const SessionState s = service.get_state(id);
    CHECK(s.pins.size() == 3);
    CHECK(s.revision == 6);
    check_snapshot(small_model(), s);
}

TEST_CASE("rejected mutations leave the revision unchanged")
{
    Gen gen(2);
    AnnotationService service;
    service.add_model("small", small_model());
    const std::string id = service.create_session("small", kImage);
    service.mutate_pins(id, add(consistent_pins(gen, small_model(), 1)[0]));

    PinMutation del;
    del.op = PinOp::Delete;
    del.pin_id = 42;
    CHECK(code_of([&] { service.mutate_pins(id, del); }) == ErrorCode::UnknownPin);
    del.pin_id.reset();
    CHECK(code_of([&] { service.mutate_pins(id, del); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([&] { service.mutate_pins(id, add({400, {1, 1}, 1})); }) == ErrorCode::InvalidVertex);
    CHECK(code_of([&] { service.mutate_pins(id, add({-1, {1, 1}, 1})); }) == ErrorCode::InvalidVertex);
    CHECK(code_of([&] { service.mutate_pins(id, add({3, {std::nan(""), 1}, 1})); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([&] { service.mutate_pins(id, add({3, {1, 1}, -1})); }) == ErrorCode::InvalidArgument);
    PinMutation stale = add({3, {1, 1}, 1});
    stale.expected_revision = 0;
    CHECK(code_of([&] { service.mutate_pins(id, stale); }) == ErrorCode::ConflictingRevision);
    CHECK(code_of([&] { service.mutate_pins("session-999", stale); }) == ErrorCode::UnknownSession);
    CHECK(service.get_state(id).revision == 1);

    stale.expected_revision = 1;
    CHECK(service.mutate_pins(id, stale).revision == 2);
}

TEST_CASE("a pin at the current projection leaves the cost unchanged")
{
    Gen gen(3);
    FitConfig config;
    config.scale_reg_with_pins = false;
    AnnotationService service(config);
    service.add_model("small", small_model());
    const std::string id = service.create_session("small", kImage);
    for (const Pin& p : consistent_pins(gen, small_model(), 8))
        service.mutate_pins(id, add(p));
    const SessionState before = service.get_state(id);
    std::set<int> used;
    for (const auto& r : before.pins)
        used.insert(r.pin.vertex_id);
    int v = 0;
    while (used.count(v))
        ++v;
    const Points2D p = project_vertices(small_model(), before.fit.params, std::vector<int>{v});
    service.mutate_pins(id, add({v, p.row(0).transpose(), 1.0}));
    const SessionState after = service.get_state(id);
    CHECK(after.fit.final_cost == doctest::Approx(before.fit.final_cost).epsilon(1e-4).scale(1e-8));
}

TEST_CASE("concurrent adds equal a sequential replay in arrival order")
{
    Gen gen(4);
    const auto pins = consistent_pins(gen, small_model(), 5);
    for (int round = 0; round < 5; ++round)
    {
        AnnotationService service;
        service.add_model("small", small_model());
        const std::string id = service.create_session("small", kImage);
        std::vector<std::thread> threads;
        for (const Pin& p : pins)
            threads.emplace_back([&, p] { service.mutate_pins(id, add(p)); });
        for (auto& t : threads)
            t.join();
        const SessionState concurrent = service.get_state(id);
        CHECK(concurrent.revision == 5);
        REQUIRE(concurrent.pins.size() == 5);

        // Pin ids record arrival order; replay that order one at a time.
        AnnotationService replay_service;
        replay_service.add_model("small", small_model());
        const std::string replay = replay_service.create_session("small", kImage);
        for (const auto& r : concurrent.pins)
            replay_service.mutate_pins(replay, add(r.pin));
        const SessionState sequential = replay_service.get_state(replay);
        for (std::size_t i = 0; i < 5; ++i)
        {
            CHECK(concurrent.pins[i].pin_id == sequential.pins[i].pin_id);
            CHECK(concurrent.pins[i].pin.vertex_id == sequential.pins[i].pin.vertex_id);
        }
        CHECK((concurrent.points - sequential.points).cwiseAbs().maxCoeff() < 1e-4);
        CHECK(concurrent.fit.rms_pin_error == doctest::Approx(sequential.fit.rms_pin_error).epsilon(1e-4).scale(1e-6));
    }
}

TEST_CASE("head subset of the canonical-size model has 3669 points")
{
    AnnotationService service;
    service.add_model("canonical", canonical_model());
    const std::string id = service.create_session("canonical", {1024, 1024});
    const SessionState s = service.get_state(id, subset_names::head);
    CHECK(s.vertex_ids.size() == 3669);
    CHECK(s.points.rows() == 3669);
    CHECK(s.subset == "head");
}

TEST_CASE("export is valid, side-effect free and decodes the fit")
{
    Gen gen(5);
    AnnotationService service;
    service.add_model("small", small_model());
    const std::string id = service.create_session("small", kImage, "face.png");
    for (const Pin& p : consistent_pins(gen, small_model(), 6))
        service.mutate_pins(id, add(p));
    const SessionState before = service.get_state(id);
    const Annotation a = service.export_annotation(id);
    const Annotation b = service.export_annotation(id);
    CHECK(validate_annotation(a, small_model()).empty());
    CHECK(a.model_id == "small");
    CHECK(a.image_ref == "face.png");
    CHECK(a.vertices == decode(small_model(), before.fit.params.shape).vertices);
    CHECK(a.vertices == b.vertices);
    CHECK(a.matrices.model_view == b.matrices.model_view);
    const SessionState after = service.get_state(id);
    CHECK(after.revision == before.revision);
    CHECK(after.points == before.points);
    REQUIRE(a.fit.has_value());

    // The exported matrices reproduce the overlay.
    const auto lmk = small_model().subset(subset_names::landmark68);
    const Points2D projected = project_frustum(subsample(a.vertices, lmk), a.matrices, a.image_size);
    CHECK((projected - before.points).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("stress: snapshots never mix revisions")
{
    Gen gen(6);
    AnnotationService service;
    service.add_model("small", small_model());
    const std::string id = service.create_session("small", kImage);
    const auto pool = consistent_pins(gen, small_model(), 40);
    std::atomic<int> accepted{0};
    std::atomic<bool> done{false};
    std::atomic<int> regressions{0};

    std::vector<std::thread> readers;
    for (int r = 0; r < 2; ++r)
        readers.emplace_back([&] {
            std::uint64_t last = 0;
            while (!done)
            {
                const SessionState s = service.get_state(id);
                check_snapshot(small_model(), s);
                if (s.revision < last)
                    ++regressions;
                last = s.revision;
            }
        });

    std::vector<std::thread> writers;
    for (int w = 0; w < 5; ++w)
        writers.emplace_back([&, w] {
            Gen local(100 + static_cast<std::uint64_t>(w));
            for (int i = 0; i < 10; ++i)
            {
                PinMutation m = add(pool[static_cast<std::size_t>(local.integer(0, 39))]);
                const int kind = local.integer(0, 2);
                if (kind > 0)
                {
                    m.op = kind == 1 ? PinOp::Move : PinOp::Delete;
                    m.pin_id = local.integer(1, 12);
                    m.pin.pixel += local.gaussian3(2.0).head<2>();
                }
                try
                {
                    service.mutate_pins(id, m);
                    ++accepted;
                }
                catch (const Error& e)
                {
                    CHECK(e.code() == ErrorCode::UnknownPin);
                }
            }
        });
    for (auto& t : writers)
        t.join();
    done = true;
    for (auto& t : readers)
        t.join();
    const SessionState final_state = service.get_state(id);
    CHECK(final_state.revision == static_cast<std::uint64_t>(accepted.load()));
    CHECK(regressions == 0);
    check_snapshot(small_model(), final_state);
}

TEST_CASE("mesh edges are unique and sorted")
{
    const Faces faces{{0, 1, 2}, {2, 1, 3}};
    const auto edges = mesh_edges(faces);
    const std::vector<std::pair<int, int>> want{{0, 1}, {0, 2}, {1, 2}, {1, 3}, {2, 3}};
    CHECK(edges == want);
}

TEST_CASE("pin mutation wire format round-trips and rejects bad input")
{
    PinMutation m;
    m.op = PinOp::Move;
    m.pin_id = 3;
    m.pin = {17, {10.5, 20.25}, 2.0};
    m.expected_revision = 9;
    const PinMutation back = pin_mutation_from_json(pin_mutation_to_json(m));
    CHECK(back.op == PinOp::Move);
    CHECK(back.pin_id == 3);
    CHECK(back.pin.vertex_id == 17);
    CHECK(back.pin.pixel == m.pin.pixel);
    CHECK(back.expected_revision == 9u);
    CHECK(code_of([] { pin_mutation_from_json(nlohmann::json{{"op", "rotate"}}); }) == ErrorCode::SchemaMismatch);
    CHECK(code_of([] { pin_mutation_from_json(nlohmann::json{{"op", "add"}}); }) == ErrorCode::SchemaMismatch);
    const auto err = error_to_json(ErrorCode::UnknownPin, "no pin 4");
    CHECK(err["error"]["code"] == "UnknownPin");
    CHECK(err["error"]["message"] == "no pin 4");
}
