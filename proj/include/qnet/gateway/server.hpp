#pragma once

// HTTP/JSON binding of the gateway service. Versioned payloads are described
// in docs/api.md. Errors come back as {"v", "error": {"code", "message"}}.

#include <chrono>
#include <functional>
#include <memory>
#include <string>

#include <httplib.h>

#include "qnet/gateway/service.hpp"

namespace qnet::gateway {

inline int http_status_for(const Error& e) {
  if (e.code() == "SchemaError") return 400;
  if (e.code() == "AuthError") return 401;
  if (e.code() == "NotFound") return 404;
  return 500;
}

inline std::string error_body(const std::string& code, const std::string& message) {
  sim::Json j;
  j["v"] = control::kSchemaVersion;
  j["error"] = {{"code", code}, {"message", message}};
  return j.dump();
}

/// One SSE frame per trace record: the record's seq is the event id.
inline std::string sse_frame(const sim::TraceRecord& r) {
  return "id: " + std::to_string(r.seq) + "\nevent: trace\ndata: " + r.to_json().dump() + "\n\n";
}

class ApiServer {
 public:
  explicit ApiServer(Service& service) : svc_(service) { routes(); }

  /// Binds and serves until stop(). Returns false if the bind fails.
  bool listen(const std::string& host, int port) { return http_.listen(host, port); }

  /// Binds to an ephemeral port; serve with listen_after_bind().
  int bind_any(const std::string& host) { return http_.bind_to_any_port(host); }
  bool listen_after_bind() { return http_.listen_after_bind(); }

  void stop() { http_.stop(); }
  bool running() const { return http_.is_running(); }
  void wait_until_ready() const { http_.wait_until_ready(); }

 private:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  /// Auth first, then the handler; library errors map to JSON error bodies.
  Handler guarded(Handler h) {
    return [this, h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
      try {
        svc_.authorize(req.get_header_value("Authorization"));
        h(req, res);
      } catch (const Error& e) {
        res.status = http_status_for(e);
        res.set_content(error_body(e.code(), e.what()), "application/json");
      } catch (const std::exception& e) {
        res.status = 500;
        res.set_content(error_body("InternalError", e.what()), "application/json");
      }
    };
  }

  static void json_reply(httplib::Response& res, const sim::Json& j, int status = 200) {
    res.status = status;
    res.set_content(j.dump(), "application/json");
  }

  void routes() {
    http_.Post("/api/v1/requests", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 sim::Json body;
                 try {
                   body = sim::Json::parse(req.body);
                 } catch (const sim::Json::parse_error& e) {
                   throw SchemaError(std::string("body is not valid JSON: ") + e.what());
                 }
                 json_reply(res, svc_.submit(body), 202);
               }));
    http_.Get("/api/v1/requests/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
                json_reply(res, svc_.get_request(req.path_params.at("id")));
              }));
    http_.Get("/api/v1/requests/:id/events", guarded([this](const httplib::Request& req, httplib::Response& res) {
                std::string id = req.path_params.at("id");
                if (!svc_.known(id)) throw NotFound("unknown request '" + id + "'");
                auto cursor = std::make_shared<std::size_t>(0);
                res.set_header("Cache-Control", "no-cache");
                res.set_chunked_content_provider(
                    "text/event-stream", [this, id, cursor](std::size_t, httplib::DataSink& sink) {
                      bool done = false;
                      auto batch = svc_.wait_events(id, *cursor, done, std::chrono::milliseconds(200));
                      for (const auto& r : batch) {
                        auto frame = sse_frame(r);
                        if (!sink.write(frame.data(), frame.size())) return false;
                      }
                      if (done) {
                        static const std::string end = "event: end\ndata: {}\n\n";
                        sink.write(end.data(), end.size());
                        sink.done();
                      }
                      return true;
                    });
              }));
    http_.Get("/api/v1/topology", guarded([this](const httplib::Request&, httplib::Response& res) {
                json_reply(res, svc_.topology());
              }));
    http_.Get("/api/v1/status", guarded([this](const httplib::Request&, httplib::Response& res) {
                json_reply(res, svc_.status());
              }));
    http_.Get("/api/v1/results/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
                json_reply(res, svc_.get_result(req.path_params.at("id")));
              }));
  }

  Service& svc_;
  httplib::Server http_;
};

}  // namespace qnet::gateway
