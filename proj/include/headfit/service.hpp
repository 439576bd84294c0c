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

#include "headfit/annotation.hpp"
#include "headfit/error.hpp"
#include "headfit/fitter.hpp"
#include "headfit/morphable.hpp"

#include "json.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace headfit {

enum class PinOp { Add, Move, Delete };

struct PinMutation
{
    PinOp op = PinOp::Add;
    /// Required for Move and Delete.
    std::optional<int> pin_id;
    /// New pin for Add and Move.
    Pin pin;
    /// When set, the mutation is rejected with ConflictingRevision unless the
    /// session is at exactly this revision.
    std::optional<std::uint64_t> expected_revision;
};

struct MutationResult
{
    std::uint64_t revision = 0;
    int pin_id = 0;
};

struct PinRecord
{
    int pin_id = 0;
    Pin pin;
};

/// What get_state returns: one consistent revision of a session.
struct SessionState
{
    std::string session_id;
    std::string model_id;
    std::uint64_t revision = 0;
    ImageSize image_size;
    std::string subset;
    std::vector<int> vertex_ids;
    Points2D points; // px, one row per vertex id
    std::vector<PinRecord> pins;
    FitResult fit;
};

struct ModelSummary
{
    std::string model_id;
    int vertex_count = 0;
    int shape_count = 0;
    int expr_count = 0;
    std::size_t face_count = 0;
    std::vector<std::string> subsets;
    bool synthetic_subsets = false;
};

/// Unique undirected edges of a triangle list, sorted.
std::vector<std::pair<int, int>> mesh_edges(const Faces& faces);

/**
 * In-memory annotation sessions over a fixed set of models.
 *
 * Mutations of one session are serialized in arrival order. Whichever caller
 * finds the session idle becomes its leader and drains the queue: it applies
 * every queued edit, runs a single warm-started refit for the batch and
 * publishes an immutable snapshot. Readers only ever see published snapshots,
 * so pins and fit always belong to the same revision.
 */
class AnnotationService
{
public:
    explicit AnnotationService(FitConfig config = {});
    ~AnnotationService();

    AnnotationService(const AnnotationService&) = delete;
    AnnotationService& operator=(const AnnotationService&) = delete;

    void add_model(const std::string& model_id, HeadModel model);
    std::vector<ModelSummary> list_models() const;
    /// Throws UnknownModel.
    std::shared_ptr<const HeadModel> model(std::string_view model_id) const;

    /// Throws UnknownModel, InvalidArgument for a non-positive image size.
    std::string create_session(const std::string& model_id, ImageSize image_size, const std::string& image_ref = {});

    /// Throws UnknownSession, UnknownPin, InvalidVertex, InvalidArgument,
    /// ConflictingRevision, or a fitter error when the refit fails.
    MutationResult mutate_pins(const std::string& session_id, const PinMutation& mutation);

    /// Throws UnknownSession and UnknownSubset.
    SessionState get_state(const std::string& session_id, std::string_view subset = subset_names::landmark68) const;

    /// Decoded vertices, orthographic-equivalent matrices, the projected head
    /// box and an empty attribute card. Does not change the session.
    Annotation export_annotation(const std::string& session_id) const;

    bool close_session(const std::string& session_id);
    std::size_t session_count() const;

private:
    struct Session;

    std::shared_ptr<Session> find(const std::string& session_id) const;

    FitConfig config_;
    mutable std::shared_mutex mutex_;
    std::map<std::string, std::shared_ptr<const HeadModel>, std::less<>> models_;
    std::map<std::string, std::shared_ptr<Session>, std::less<>> sessions_;
    std::uint64_t next_session_ = 1;
};

// Wire formats of the HTTP endpoints.

nlohmann::json state_to_json(const SessionState& state);
nlohmann::json model_summary_to_json(const ModelSummary& summary);
/// {"op": "add" | "move" | "delete", "pin_id", "pin", "expected_revision"}.
/// Throws SchemaMismatch.
PinMutation pin_mutation_from_json(const nlohmann::json& j);
nlohmann::json pin_mutation_to_json(const PinMutation& mutation);
nlohmann::json error_to_json(ErrorCode code, const std::string& message);

} // namespace headfit
