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

#include "headfit/service.hpp"

#include <map>
#include <memory>
#include <string>
#include <string_view>

namespace httplib {
class Server;
}

namespace headfit {

struct HttpResponse
{
    int status = 200;
    std::string body;
};

/**
 * Routes one request against the service. All bodies are JSON; errors carry
 * {"error": {"code", "message"}} with the library error code.
 *
 *   GET    /health
 *   GET    /models
 *   GET    /models/{id}                  summary plus wireframe edges
 *   POST   /sessions                     {"model_id", "image_size", "image_ref"?}
 *   DELETE /sessions/{id}
 *   POST   /sessions/{id}/pins           pin mutation
 *   GET    /sessions/{id}/state?subset=  defaults to landmark68
 *   GET    /sessions/{id}/export         annotation document
 */
HttpResponse handle_request(AnnotationService& service, std::string_view method, std::string_view path,
                            const std::map<std::string, std::string>& query, std::string_view body);

/// Plain HTTP front end for handle_request with permissive CORS headers.
class HttpServer
{
public:
    explicit HttpServer(AnnotationService& service);
    ~HttpServer();

    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds to host:port (port 0 picks a free port) and returns the port.
    /// Throws IoError.
    int bind(const std::string& host, int port);
    /// Serves until stop() is called.
    void run();
    void stop();

private:
    AnnotationService& service_;
    std::unique_ptr<httplib::Server> server_;
};

} // namespace headfit
