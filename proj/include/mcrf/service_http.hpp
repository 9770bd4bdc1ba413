#pragma once

// HTTP binding of FitService (cpp-httplib). Pulls in httplib, so only the
// CLI and the service tests include it.

#include <map>
#include <string>

#include <httplib.h>

#include "mcrf/service.hpp"

namespace mcrf {

namespace detail {

inline bool local_origin(const std::string& origin) {
  for (const char* p : {"http://localhost", "http://127.0.0.1", "http://[::1]"}) {
    const std::string prefix = p;
    if (origin.compare(0, prefix.size(), prefix) == 0 &&
        (origin.size() == prefix.size() || origin[prefix.size()] == ':'))
      return true;
  }
  return false;
}

}  // namespace detail

/// Registers every endpoint plus CORS handling for localhost origins.
inline void mount(httplib::Server& srv, FitService& svc) {
  auto forward = [&svc](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> query;
    for (const auto& [k, v] : req.params) query.emplace(k, v);
    const auto out = svc.handle(req.method, req.path, query, req.body);
    res.status = out.status;
    res.set_content(out.body.dump(), "application/json");
  };
  srv.Get("/session/summary", forward);
  srv.Get("/transiogram", forward);
  srv.Post("/model/evaluate", forward);
  srv.Put("/draft/entry", forward);
  srv.Get("/modelset", forward);
  srv.Put("/modelset", forward);
  srv.Post("/preview", forward);
  srv.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  srv.set_post_routing_handler([](const httplib::Request& req, httplib::Response& res) {
    const auto origin = req.get_header_value("Origin");
    if (!detail::local_origin(origin)) return;
    res.set_header("Access-Control-Allow-Origin", origin);
    res.set_header("Vary", "Origin");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, PUT, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
  });
  srv.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    const auto r = detail::error_response(res.status, res.status == 404 ? "not_found" : "http",
                                          "no route " + req.method + " " + req.path);
    res.set_content(r.body.dump(), "application/json");
  });
}

/// Blocks serving on host:port until the server is stopped.
inline bool serve(FitService& svc, const std::string& host, int port) {
  httplib::Server srv;
  mount(srv, svc);
  return srv.listen(host, port);
}

}  // namespace mcrf
