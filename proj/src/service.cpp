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
#include "headfit/service.hpp"

#include "headfit/camera.hpp"
#include "headfit/dataio.hpp"
#include "headfit/params.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <exception>
#include <future>
#include <mutex>
#include <set>
#include <variant>

namespace headfit {

using nlohmann::json;

namespace {

struct Snapshot
{
    std::uint64_t revision = 0;
    std::vector<PinRecord> pins;
    FitResult fit;
};

std::vector<Pin> bare_pins(const std::vector<PinRecord>& records)
{
    std::vector<Pin> pins;
    pins.reserve(records.size());
    for (const auto& r : records)
    {
        pins.push_back(r.pin);
    }
    return pins;
}

void check_pin(const HeadModel& model, const Pin& pin)
{
    if (pin.vertex_id < 0 || pin.vertex_id >= model.vertex_count())
    {
        throw Error(ErrorCode::InvalidVertex, "vertex id " + std::to_string(pin.vertex_id) + " outside [0, " +
                                                  std::to_string(model.vertex_count()) + ")");
    }
    if (!pin.pixel.allFinite() || !std::isfinite(pin.weight) || !(pin.weight > 0.0))
    {
        throw Error(ErrorCode::InvalidArgument, "pin pixel must be finite and weight positive");
    }
}

} // namespace

struct AnnotationService::Session
{
    struct Pending
    {
        PinMutation mutation;
        std::promise<MutationResult> done;
    };

    std::string id;
    std::string model_id;
    std::string image_ref;
    ImageSize image_size;
    std::shared_ptr<const HeadModel> model;

    std::mutex queue_mutex;
    std::deque<Pending*> queue;
    bool leader_active = false;

    // Touched by the leader only.
    FitSession fit_session;
    int next_pin_id = 1;

    mutable std::mutex snapshot_mutex;
    std::shared_ptr<const Snapshot> snapshot;

    std::shared_ptr<const Snapshot> current() const
    {
        std::lock_guard guard(snapshot_mutex);
        return snapshot;
    }

    void publish(std::shared_ptr<const Snapshot> next)
    {
        std::lock_guard guard(snapshot_mutex);
        snapshot = std::move(next);
    }

    void process(std::vector<Pending*>& batch);
};

void AnnotationService::Session::process(std::vector<Pending*>& batch)
{
    const auto base = current();
    std::vector<PinRecord> pins = base->pins;
    std::uint64_t revision = base->revision;
    int next_id = next_pin_id;
    std::vector<std::variant<MutationResult, std::exception_ptr>> outcomes;
    bool changed = false;

    for (Pending* p : batch)
    {
        try
        {
            const PinMutation& m = p->mutation;
            if (m.expected_revision && *m.expected_revision != revision)
            {
                throw Error(ErrorCode::ConflictingRevision, "expected revision " +
                                                                std::to_string(*m.expected_revision) +
                                                                ", session is at " + std::to_string(revision));
            }
            MutationResult r;
            if (m.op == PinOp::Add)
            {
                check_pin(*model, m.pin);
                r.pin_id = next_id++;
                pins.push_back({r.pin_id, m.pin});
            }
            else
            {
                if (!m.pin_id)
                {
                    throw Error(ErrorCode::InvalidArgument, "move and delete need a pin_id");
                }
                const auto it = std::find_if(pins.begin(), pins.end(),
                                             [&](const PinRecord& rec) { return rec.pin_id == *m.pin_id; });
                if (it == pins.end())
                {
                    throw Error(ErrorCode::UnknownPin, "no pin with id " + std::to_string(*m.pin_id));
                }
                r.pin_id = *m.pin_id;
                if (m.op == PinOp::Move)
                {
                    check_pin(*model, m.pin);
                    it->pin = m.pin;
                }
                else
                {
                    pins.erase(it);
                }
            }
            r.revision = ++revision;
            changed = true;
            outcomes.emplace_back(r);
        }
        catch (...)
        {
            outcomes.emplace_back(std::current_exception());
        }
    }

    if (changed)
    {
        // One refit for the whole batch; intermediate pin sets are never published.
        const std::vector<Pin> previous = fit_session.pins;
        fit_session.pins = bare_pins(pins);
        try
        {
            auto next = std::make_shared<Snapshot>();
            next->fit = refit(*model, fit_session);
            next->pins = std::move(pins);
            next->revision = revision;
            next_pin_id = next_id;
            publish(std::move(next));
        }
        catch (...)
        {
            fit_session.pins = previous;
            const auto failure = std::current_exception();
            for (auto& o : outcomes)
            {
                if (std::holds_alternative<MutationResult>(o))
                {
                    o = failure;
                }
            }
        }
    }

    for (std::size_t i = 0; i < batch.size(); ++i)
    {
        if (const auto* r = std::get_if<MutationResult>(&outcomes[i]))
        {
            batch[i]->done.set_value(*r);
        }
        else
        {
            batch[i]->done.set_exception(std::get<std::exception_ptr>(outcomes[i]));
        }
    }
}

std::vector<std::pair<int, int>> mesh_edges(const Faces& faces)
{
    std::set<std::pair<int, int>> edges;
    for (const auto& f : faces)
    {
        for (int k = 0; k < 3; ++k)
        {
            const int a = f[static_cast<std::size_t>(k)];
            const int b = f[static_cast<std::size_t>((k + 1) % 3)];
            edges.emplace(std::min(a, b), std::max(a, b));
        }
    }
    return {edges.begin(), edges.end()};
}

AnnotationService::AnnotationService(FitConfig config) : config_(config) {}

AnnotationService::~AnnotationService() = default;

void AnnotationService::add_model(const std::string& model_id, HeadModel model)
{
    const auto problems = check_invariants(model);
    if (!problems.empty())
    {
        throw Error(ErrorCode::InvalidArgument, "model '" + model_id + "': " + problems.front());
    }
    std::unique_lock lock(mutex_);
    models_[model_id] = std::make_shared<const HeadModel>(std::move(model));
}

std::vector<ModelSummary> AnnotationService::list_models() const
{
    std::shared_lock lock(mutex_);
    std::vector<ModelSummary> out;
    for (const auto& [id, m] : models_)
    {
        ModelSummary s;
        s.model_id = id;
        s.vertex_count = m->vertex_count();
        s.shape_count = m->shape_count();
        s.expr_count = m->expr_count();
        s.face_count = m->faces.size();
        s.subsets.emplace_back(subset_names::full);
        for (const auto& [name, ids] : m->subsets)
        {
            s.subsets.push_back(name);
        }
        s.synthetic_subsets = m->synthetic_subsets;
        out.push_back(std::move(s));
    }
    return out;
}

std::shared_ptr<const HeadModel> AnnotationService::model(std::string_view model_id) const
{
    std::shared_lock lock(mutex_);
    const auto it = models_.find(model_id);
    if (it == models_.end())
    {
        throw Error(ErrorCode::UnknownModel, "no model '" + std::string(model_id) + "'");
    }
    return it->second;
}

std::string AnnotationService::create_session(const std::string& model_id, ImageSize image_size,
                                              const std::string& image_ref)
{
    auto m = model(model_id);
    if (image_size.width <= 0 || image_size.height <= 0)
    {
        throw Error(ErrorCode::InvalidArgument, "image size must be positive");
    }
    auto session = std::make_shared<Session>();
    session->model_id = model_id;
    session->image_ref = image_ref;
    session->image_size = image_size;
    session->model = m;
    session->fit_session.config = config_;
    session->fit_session.neutral = FitParams::neutral(*m, image_size);

    auto snap = std::make_shared<Snapshot>();
    snap->fit = refit(*m, session->fit_session);
    session->snapshot = std::move(snap);

    std::unique_lock lock(mutex_);
    session->id = "session-" + std::to_string(next_session_++);
    sessions_[session->id] = session;
    return session->id;
}

std::shared_ptr<AnnotationService::Session> AnnotationService::find(const std::string& session_id) const
{
    std::shared_lock lock(mutex_);
    const auto it = sessions_.find(session_id);
    if (it == sessions_.end())
    {
        throw Error(ErrorCode::UnknownSession, "no session '" + session_id + "'");
    }
    return it->second;
}

MutationResult AnnotationService::mutate_pins(const std::string& session_id, const PinMutation& mutation)
{
    auto session = find(session_id);
    Session::Pending pending{mutation, {}};
    auto done = pending.done.get_future();
    bool lead = false;
    {
        std::lock_guard guard(session->queue_mutex);
        session->queue.push_back(&pending);
        lead = !session->leader_active;
        session->leader_active = true;
    }
    // Otherwise the active leader picks this request up.
    while (lead)
    {
        std::vector<Session::Pending*> batch;
        {
            std::lock_guard guard(session->queue_mutex);
            if (session->queue.empty())
            {
                session->leader_active = false;
                break;
            }
            batch.assign(session->queue.begin(), session->queue.end());
            session->queue.clear();
        }
        session->process(batch);
    }
    return done.get();
}

SessionState AnnotationService::get_state(const std::string& session_id, std::string_view subset) const
{
    const auto session = find(session_id);
    const auto snap = session->current();
    SessionState s;
    s.session_id = session->id;
    s.model_id = session->model_id;
    s.revision = snap->revision;
    s.image_size = session->image_size;
    s.subset = std::string(subset);
    s.vertex_ids = session->model->subset(subset);
    s.points = project_vertices(*session->model, snap->fit.params, s.vertex_ids);
    s.pins = snap->pins;
    s.fit = snap->fit;
    return s;
}

Annotation AnnotationService::export_annotation(const std::string& session_id) const
{
    const auto session = find(session_id);
    const auto snap = session->current();
    const HeadModel& m = *session->model;
    const FitParams& params = snap->fit.params;

    Annotation a;
    a.model_id = session->model_id;
    a.image_ref = session->image_ref;
    a.image_size = session->image_size;
    a.vertices = decode(m, params.shape).vertices;
    a.matrices = orthographic_matrices(params.similarity(), session->image_size);
    a.projection = "orthographic";

    const Points2D head = project_vertices(m, params, m.subset(m.has_subset(subset_names::head) ? subset_names::head
                                                                                                 : subset_names::full));
    const Eigen::RowVector2d lo = head.colwise().minCoeff();
    const Eigen::RowVector2d hi = head.colwise().maxCoeff();
    a.bbox = {lo.x(), lo.y(), std::max(hi.x() - lo.x(), 1e-9), std::max(hi.y() - lo.y(), 1e-9)};
    a.fit = snap->fit;
    return a;
}

bool AnnotationService::close_session(const std::string& session_id)
{
    std::unique_lock lock(mutex_);
    return sessions_.erase(session_id) > 0;
}

std::size_t AnnotationService::session_count() const
{
    std::shared_lock lock(mutex_);
    return sessions_.size();
}

// ---------------------------------------------------------------- wire formats

json state_to_json(const SessionState& s)
{
    json points = json::array();
    for (Eigen::Index i = 0; i < s.points.rows(); ++i)
    {
        points.push_back({s.points(i, 0), s.points(i, 1)});
    }
    json pins = json::array();
    for (const auto& p : s.pins)
    {
        json j = pin_to_json(p.pin);
        j["pin_id"] = p.pin_id;
        pins.push_back(std::move(j));
    }
    return json{{"schema", "headfit.state"},
                {"version", kFormatVersion},
                {"session_id", s.session_id},
                {"model_id", s.model_id},
                {"revision", s.revision},
                {"image_size", {{"width", s.image_size.width}, {"height", s.image_size.height}, {"units", "px"}}},
                {"subset", s.subset},
                {"vertex_ids", s.vertex_ids},
                {"points", std::move(points)},
                {"pins", std::move(pins)},
                {"params", params_to_json(s.fit.params)},
                {"rms_pin_error", s.fit.rms_pin_error},
                {"iterations", s.fit.iterations},
                {"converged", s.fit.converged},
                {"units", "px"}};
}

json model_summary_to_json(const ModelSummary& s)
{
    return json{{"model_id", s.model_id},           {"vertex_count", s.vertex_count},
                {"shape_count", s.shape_count},     {"expr_count", s.expr_count},
                {"face_count", s.face_count},       {"subsets", s.subsets},
                {"synthetic_subsets", s.synthetic_subsets}};
}

PinMutation pin_mutation_from_json(const json& j)
{
    if (!j.is_object())
    {
        throw Error(ErrorCode::SchemaMismatch, "mutation: expected an object");
    }
    PinMutation m;
    const auto op = j.find("op");
    if (op == j.end() || !op->is_string())
    {
        throw Error(ErrorCode::SchemaMismatch, "mutation.op: missing field");
    }
    const std::string name = op->get<std::string>();
    if (name == "add")
        m.op = PinOp::Add;
    else if (name == "move")
        m.op = PinOp::Move;
    else if (name == "delete")
        m.op = PinOp::Delete;
    else
        throw Error(ErrorCode::SchemaMismatch, "mutation.op: expected add, move or delete");

    if (const auto it = j.find("pin_id"); it != j.end() && !it->is_null())
    {
        if (!it->is_number_integer())
            throw Error(ErrorCode::SchemaMismatch, "mutation.pin_id: expected an integer");
        m.pin_id = it->get<int>();
    }
    if (m.op != PinOp::Add && !m.pin_id)
    {
        throw Error(ErrorCode::SchemaMismatch, "mutation.pin_id: missing field");
    }
    if (m.op != PinOp::Delete)
    {
        const auto it = j.find("pin");
        if (it == j.end())
            throw Error(ErrorCode::SchemaMismatch, "mutation.pin: missing field");
        m.pin = pin_from_json(*it, "mutation.pin");
    }
    if (const auto it = j.find("expected_revision"); it != j.end() && !it->is_null())
    {
        if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<long long>() >= 0))
            throw Error(ErrorCode::SchemaMismatch, "mutation.expected_revision: expected a non-negative integer");
        m.expected_revision = it->get<std::uint64_t>();
    }
    return m;
}

json pin_mutation_to_json(const PinMutation& m)
{
    static constexpr const char* kOps[] = {"add", "move", "delete"};
    json j{{"op", kOps[static_cast<int>(m.op)]}};
    if (m.pin_id)
        j["pin_id"] = *m.pin_id;
    if (m.op != PinOp::Delete)
        j["pin"] = pin_to_json(m.pin);
    if (m.expected_revision)
        j["expected_revision"] = *m.expected_revision;
    return j;
}

json error_to_json(ErrorCode code, const std::string& message)
{
    return json{{"error", {{"code", std::string(to_string(code))}, {"message", message}}}};
}

} // namespace headfit
