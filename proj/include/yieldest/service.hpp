#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

namespace httplib {
class Server;
}

namespace yieldest {

struct ServiceOptions {
  std::filesystem::path data_root;  // searched for *manifest.json files
  std::filesystem::path state_dir;  // session logs and models; default <data_root>/.yieldest
  std::optional<std::filesystem::path> ui_dir;  // static bundle mounted at /
};

struct ApiRequest {
  std::string method;  // GET | POST
  std::string path;    // e.g. /v1/sessions/abc/click
  std::map<std::string, std::string> query;
  std::string body;
  std::optional<std::string> idempotency_key;
};

struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// The /v1 API. Routing and state live here so the same handler serves
/// HTTP and in-process callers.
///
///   POST /v1/sessions                       {dataset, frames? | first?, count?, config?}
///   GET  /v1/sessions/{id}
///   POST /v1/sessions/{id}/click            {frame, x, y}
///   POST /v1/sessions/{id}/label            {component_id, label}
///   POST /v1/sessions/{id}/finalize
///   GET  /v1/models/{id}
///   POST /v1/models/{id}/detect?frame=F[&dataset=D]
///   GET  /v1/frames/{id}[?dataset=D]        PNG
///   GET  /v1/datasets
///   GET  /v1/reports/{dataset}
///
/// Errors: 404 unknown ids, 409 mutation of a finalized or busy session,
/// 422 validation failures. Mutations honour an Idempotency-Key header.
class Service {
 public:
  explicit Service(ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  ApiResponse handle(const ApiRequest& request);

  /// Registers the /v1 routes (and the UI bundle, if any) on `server`.
  void mount(httplib::Server& server);

  const ServiceOptions& options() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Blocking HTTP server; returns when the listener stops.
void serve(const ServiceOptions& options, const std::string& host, int port);

}  // namespace yieldest
