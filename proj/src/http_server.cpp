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
#include "headfit/http_server.hpp"

#include "headfit/dataio.hpp"
#include "headfit/error.hpp"

#include "httplib.h"

#include <vector>

namespace headfit {

using nlohmann::json;

namespace {

int status_for(ErrorCode code)
{
    switch (code)
    {
    case ErrorCode::UnknownModel:
    case ErrorCode::UnknownSession:
    case ErrorCode::UnknownPin:
    case ErrorCode::UnknownSubset:
        return 404;
    case ErrorCode::ConflictingRevision:
        return 409;
    case ErrorCode::ParseError:
    case ErrorCode::SchemaMismatch:
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidVertex:
    case ErrorCode::DimensionMismatch:
        return 400;
    default:
        return 422;
    }
}

HttpResponse ok(const json& j, int status = 200)
{
    return {status, j.dump()};
}

HttpResponse failure(int status, std::string_view code, const std::string& message)
{
    return {status, json{{"error", {{"code", code}, {"message", message}}}}.dump()};
}

std::vector<std::string> split_path(std::string_view path)
{
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (pos < path.size())
    {
        std::size_t next = path.find('/', pos);
        if (next == std::string_view::npos)
            next = path.size();
        if (next > pos)
            parts.emplace_back(path.substr(pos, next - pos));
        pos = next + 1;
    }
    return parts;
}

HttpResponse route(AnnotationService& service, std::string_view method, const std::vector<std::string>& p,
                   const std::map<std::string, std::string>& query, std::string_view body)
{
    const bool get = method == "GET";
    const bool post = method == "POST";
    if (p.size() == 1 && p[0] == "health" && get)
    {
        return ok({{"status", "ok"}});
    }
    if (p.size() == 1 && p[0] == "models" && get)
    {
        json models = json::array();
        for (const auto& m : service.list_models())
            models.push_back(model_summary_to_json(m));
        return ok({{"models", std::move(models)}});
    }
    if (p.size() == 2 && p[0] == "models" && get)
    {
        const auto model = service.model(p[1]);
        for (const auto& m : service.list_models())
        {
            if (m.model_id != p[1])
                continue;
            json j = model_summary_to_json(m);
            json edges = json::array();
            for (const auto& [a, b] : mesh_edges(model->faces))
                edges.push_back({a, b});
            j["edges"] = std::move(edges);
            return ok(j);
        }
    }
    if (p.size() == 1 && p[0] == "sessions" && post)
    {
        const json j = parse_json(body, "request body");
        if (!j.is_object() || !j.contains("model_id") || !j["model_id"].is_string())
            throw Error(ErrorCode::SchemaMismatch, "session.model_id: missing field");
        if (!j.contains("image_size") || !j["image_size"].is_object())
            throw Error(ErrorCode::SchemaMismatch, "session.image_size: missing field");
        const json& size = j["image_size"];
        if (!size.contains("width") || !size.contains("height") || !size["width"].is_number_integer() ||
            !size["height"].is_number_integer())
            throw Error(ErrorCode::SchemaMismatch, "session.image_size: expected integer width and height");
        const std::string image_ref = j.contains("image_ref") && j["image_ref"].is_string()
                                          ? j["image_ref"].get<std::string>()
                                          : std::string();
        const std::string id = service.create_session(
            j["model_id"].get<std::string>(), {size["width"].get<int>(), size["height"].get<int>()}, image_ref);
        return ok({{"session_id", id}, {"revision", 0}}, 201);
    }
    if (p.size() == 2 && p[0] == "sessions" && method == "DELETE")
    {
        if (!service.close_session(p[1]))
            throw Error(ErrorCode::UnknownSession, "no session '" + p[1] + "'");
        return ok({{"closed", true}});
    }
    if (p.size() == 3 && p[0] == "sessions")
    {
        if (p[2] == "pins" && post)
        {
            const MutationResult r = service.mutate_pins(p[1], pin_mutation_from_json(parse_json(body, "request body")));
            return ok({{"revision", r.revision}, {"pin_id", r.pin_id}});
        }
        if (p[2] == "state" && get)
        {
            const auto it = query.find("subset");
            const std::string subset = it == query.end() ? std::string(subset_names::landmark68) : it->second;
            return ok(state_to_json(service.get_state(p[1], subset)));
        }
        if (p[2] == "export" && get)
        {
            return ok(annotation_to_json(service.export_annotation(p[1])));
        }
    }
    return failure(404, "NotFound", "no route for " + std::string(method));
}

} // namespace

HttpResponse handle_request(AnnotationService& service, std::string_view method, std::string_view path,
                            const std::map<std::string, std::string>& query, std::string_view body)
{
    try
    {
        return route(service, method, split_path(path), query, body);
    }
    catch (const Error& e)
    {
        return failure(status_for(e.code()), to_string(e.code()), e.what());
    }
    catch (const std::exception& e)
    {
        return failure(500, "InternalError", e.what());
    }
}

HttpServer::HttpServer(AnnotationService& service) : service_(service), server_(std::make_unique<httplib::Server>())
{
    const auto handler = [this](const httplib::Request& req, httplib::Response& res) {
        std::map<std::string, std::string> query;
        for (const auto& [k, v] : req.params)
            query.emplace(k, v);
        const HttpResponse r = handle_request(service_, req.method, req.path, query, req.body);
        res.status = r.status;
        res.set_content(r.body, "application/json");
    };
    // Address reuse only: a second server on a busy port must fail to bind.
    server_->set_socket_options([](socket_t sock) {
        int yes = 1;
        ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
    });
    server_->set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                  {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"},
                                  {"Access-Control-Allow-Headers", "Content-Type"}});
    server_->Get(R"(/.*)", handler);
    server_->Post(R"(/.*)", handler);
    server_->Delete(R"(/.*)", handler);
    server_->Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port)
{
    const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (bound <= 0)
    {
        throw Error(ErrorCode::IoError, "cannot bind " + host + ":" + std::to_string(port));
    }
    return bound;
}

void HttpServer::run()
{
    server_->listen_after_bind();
}

void HttpServer::stop()
{
    server_->stop();
}

} // namespace headfit
