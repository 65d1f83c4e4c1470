// Copyright 2026 The hatformer Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "hatformer/service/api.hpp"

// Must come after Eigen.
#include <httplib.h>

namespace hatformer::service {

struct ServeOptions {
  std::string host = "127.0.0.1";
  /// 0 picks a free port.
  int port = 8080;
  /// Optional directory of static UI files mounted at "/".
  std::filesystem::path static_dir;
  std::string cors_origin = "*";
};

/// Owns the store and the HTTP server. Construct, then call listen() (blocks)
/// or start() + port() + stop() from another thread.
class Server {
public:
  Server(const std::filesystem::path& run_dir, ServeOptions opts)
      : store_(run_dir), api_(store_), opts_(std::move(opts)) {
    auto send = [](httplib::Response& res, const Response& r) {
      res.status = r.status;
      res.set_content(r.body, r.content_type);
    };
    http_.set_default_headers({{"Access-Control-Allow-Origin", opts_.cors_origin},
                               {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                               {"Access-Control-Allow-Headers", "Content-Type"}});
    http_.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    http_.Get("/api/meta", [this, send](const httplib::Request&, httplib::Response& res) { send(res, api_.meta()); });
    http_.Get("/api/records", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, api_.records(params(req)));
    });
    http_.Get(R"(/api/records/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, api_.record(req.matches[1]));
    });
    http_.Get(R"(/api/images/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, api_.image(req.matches[1]));
    });
    http_.Get(R"(/api/attention/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, api_.attention(req.matches[1], params(req)));
    });
    http_.Post("/api/cer", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, api_.cer(req.body));
    });
    if (!opts_.static_dir.empty() && !http_.set_mount_point("/", opts_.static_dir.string())) {
      throw IoError("cannot serve static files from " + opts_.static_dir.string());
    }
    http_.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
      if (res.status == 404 && res.body.empty()) {
        const auto r = Response::error(404, "not_found", "no route for " + req.method + " " + req.path);
        res.set_content(r.body, r.content_type);
      }
    });
    http_.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string what = "internal error";
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        what = e.what();
      } catch (...) {
      }
      const auto r = Response::error(500, "internal", what);
      res.status = 500;
      res.set_content(r.body, r.content_type);
    });
  }

  const RunStore& store() const { return store_; }

  /// Binds; returns the bound port.
  int bind() {
    port_ = opts_.port == 0 ? http_.bind_to_any_port(opts_.host) : (http_.bind_to_port(opts_.host, opts_.port) ? opts_.port : -1);
    if (port_ < 0) throw IoError("cannot bind " + opts_.host + ":" + std::to_string(opts_.port));
    return port_;
  }
  /// Serves until stop(); bind() first.
  void listen() { http_.listen_after_bind(); }
  void stop() { http_.stop(); }
  void wait_until_ready() { http_.wait_until_ready(); }
  int port() const { return port_; }

private:
  static Params params(const httplib::Request& req) {
    Params p;
    for (const auto& [k, v] : req.params) p[k] = v;
    return p;
  }

  RunStore store_;
  Api api_;
  ServeOptions opts_;
  httplib::Server http_;
  int port_ = -1;
};

}  // namespace hatformer::service
