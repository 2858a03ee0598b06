#include "yieldest/service.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <sstream>

#include "yieldest/data_io.hpp"
#include "yieldest/detect.hpp"
#include "yieldest/errors.hpp"
#include "yieldest/pipeline.hpp"
#include "yieldest/png_io.hpp"
#include "yieldest/rle.hpp"

// After Eigen: <resolv.h> defines a macro named _res.
#include <httplib.h>

namespace yieldest {

using nlohmann::json;

namespace {

int status_for(const std::string& kind) {
  if (kind == "not-found") return 404;
  if (kind == "conflict") return 409;
  if (kind == "io" || kind == "numerical-conditioning") return 500;
  return 422;
}

ApiResponse json_response(int status, const json& body) { return {status, "application/json", body.dump()}; }

ApiResponse error_response(int status, const std::string& kind, const std::string& message) {
  return json_response(status, {{"error", kind}, {"message", message}});
}

std::string now_iso() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string random_token(const char* prefix) {
  static std::mutex mu;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(mu);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%s%016llx", prefix, static_cast<unsigned long long>(rng()));
  return buf;
}

json parse_body(const std::string& body) {
  if (body.find_first_not_of(" \t\r\n") == std::string::npos) return json::object();
  try {
    json j = json::parse(body);
    if (!j.is_object()) throw ValidationError("request body must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed JSON body: ") + e.what());
  }
}

// Canonical form of a request used to detect Idempotency-Key reuse.
std::string canonical(const std::string& route, const json& body) { return route + " " + body.dump(); }

void append_line(const fs::path& path, const json& entry) {
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw IoError("cannot append to " + path.string());
  out << entry.dump() << '\n';
  out.flush();
  if (!out) throw IoError("append failed for " + path.string());
}

std::vector<json> read_log(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      // A torn final line from a crash is dropped; anything earlier is corruption.
      if (in.peek() == std::char_traits<char>::eof()) break;
      throw ParseError(path.string(), lineno, e.what());
    }
  }
  return out;
}

struct SessionEntry {
  std::shared_mutex mu;
  std::string id;
  std::string dataset;
  std::string created;
  std::vector<std::string> frames;
  json config = json::object();
  fs::path log;
  bool finalized = false;
  std::string model_id;
  std::unique_ptr<SupervisionSession> session;  // replayed on first use
  std::map<std::string, std::pair<std::string, ApiResponse>> idempotent;
};

}  // namespace

struct Service::Impl {
  ServiceOptions opt;
  std::mutex registry_mu;
  std::map<std::string, std::shared_ptr<const DatasetManifest>> datasets;
  std::map<std::string, std::shared_ptr<SessionEntry>> sessions;
  std::map<std::string, std::shared_ptr<const ColorModel>> models;
  std::map<std::string, std::string> model_dataset;
  std::map<std::string, std::pair<std::string, std::string>> create_keys;  // key -> (request, session id)

  fs::path sessions_dir() const { return opt.state_dir / "sessions"; }
  fs::path models_dir() const { return opt.state_dir / "models"; }

  void scan_datasets() {
    std::map<std::string, std::shared_ptr<const DatasetManifest>> found;
    if (fs::exists(opt.data_root)) {
      for (auto it = fs::recursive_directory_iterator(opt.data_root); it != fs::recursive_directory_iterator(); ++it) {
        if (it->is_directory() && fs::equivalent(it->path(), opt.state_dir)) {
          it.disable_recursion_pending();
          continue;
        }
        const std::string name = it->path().filename().string();
        if (!it->is_regular_file() || (name != "manifest.json" && !name.ends_with(".manifest.json"))) continue;
        try {
          auto m = std::make_shared<const DatasetManifest>(load_manifest(it->path()));
          found.emplace(m->dataset_id, std::move(m));
        } catch (const Error&) {
          // Unreadable manifests are simply not served.
        }
      }
    }
    std::lock_guard lock(registry_mu);
    datasets = std::move(found);
  }

  std::shared_ptr<const DatasetManifest> dataset(const std::string& id) {
    {
      std::lock_guard lock(registry_mu);
      const auto it = datasets.find(id);
      if (it != datasets.end()) return it->second;
    }
    scan_datasets();
    std::lock_guard lock(registry_mu);
    const auto it = datasets.find(id);
    if (it == datasets.end()) throw NotFoundError("unknown dataset '" + id + "'");
    return it->second;
  }

  void scan_state() {
    fs::create_directories(sessions_dir());
    fs::create_directories(models_dir());
    for (const auto& e : fs::directory_iterator(sessions_dir())) {
      if (e.path().extension() != ".jsonl") continue;
      const auto log = read_log(e.path());
      if (log.empty() || log[0].value("op", "") != "create") continue;
      auto s = std::make_shared<SessionEntry>();
      s->id = log[0].at("session_id").get<std::string>();
      s->dataset = log[0].at("dataset").get<std::string>();
      s->created = log[0].value("created", "");
      s->frames = log[0].at("frames").get<std::vector<std::string>>();
      s->config = log[0].value("config", json::object());
      s->log = e.path();
      for (const auto& entry : log) {
        if (entry.value("op", "") == "finalize") {
          s->finalized = true;
          s->model_id = entry.at("model_id").get<std::string>();
          model_dataset[s->model_id] = s->dataset;
        }
      }
      if (log[0].contains("key")) create_keys[log[0]["key"].get<std::string>()] = {log[0].at("request").get<std::string>(), s->id};
      sessions[s->id] = s;
    }
  }

  std::shared_ptr<SessionEntry> entry(const std::string& id) {
    std::lock_guard lock(registry_mu);
    const auto it = sessions.find(id);
    if (it == sessions.end()) throw NotFoundError("unknown session '" + id + "'");
    return it->second;
  }

  std::unique_ptr<SupervisionSession> build_session(const std::string& dataset_id, const std::vector<std::string>& frames,
                                                    const json& config) {
    const auto m = dataset(dataset_id);
    std::vector<SessionFrame> sf;
    for (const auto& id : frames) sf.push_back({id, rgb_to_lab(read_png_rgb(m->frame(id).path))});
    return std::make_unique<SupervisionSession>(dataset_id, std::move(sf), detect_config_from_json(config));
  }

  // --- responses shared by live requests and log replay

  static json summary(const SessionEntry& s) {
    json j = {{"session_id", s.id}, {"dataset", s.dataset}, {"frames", s.frames}, {"created", s.created},
              {"state", s.finalized ? "finalized" : "open"}};
    if (s.finalized) j["model_id"] = s.model_id;
    if (s.session) {
      j["components"] = s.session->mixture().size();
      json clicks = json::array();
      for (const auto& c : s.session->clicks()) {
        clicks.push_back({{"frame", c.frame_id}, {"x", c.x}, {"y", c.y}, {"component_id", c.component}, {"accepted", c.accepted}});
      }
      j["clicks"] = clicks;
      json labels = json::object();
      for (const auto& [k, l] : s.session->labels()) labels[std::to_string(k)] = to_string(l);
      j["labels"] = labels;
    }
    return j;
  }

  static ApiResponse click_response(const SessionEntry& s, const ClickResult& r) {
    const std::string& frame = s.frames[r.clicked_frame];
    const auto& color = s.session->mixture().component(r.component).mean();
    return json_response(200, {{"component_id", r.component},
                               {"frame", frame},
                               {"color_lab", {color(0), color(1), color(2)}},
                               {"highlight_mask_rle", rle_to_json(rle_encode(r.highlights[r.clicked_frame]))}});
  }

  // Applies one logged or live mutation to a loaded session.
  ApiResponse apply(SessionEntry& s, const std::string& op, const json& body) {
    if (op == "click") {
      const ClickResult r = click_to_cluster(*s.session, body.at("frame").get<std::string>(), body.at("x").get<int>(),
                                             body.at("y").get<int>());
      return click_response(s, r);
    }
    if (op == "label") {
      label_cluster(*s.session, body.at("component_id").get<int>(),
                    color_label_from_string(body.at("label").get<std::string>()));
      return json_response(200, summary(s));
    }
    throw ValidationError("unknown operation '" + op + "'");
  }

  void ensure_loaded(SessionEntry& s) {
    if (s.session) return;
    s.session = build_session(s.dataset, s.frames, s.config);
    const auto log = read_log(s.log);
    for (std::size_t i = 1; i < log.size(); ++i) {
      const std::string op = log[i].at("op").get<std::string>();
      if (op == "finalize") {
        ApiResponse r = json_response(201, {{"model_id", s.model_id}, {"session_id", s.id}});
        if (log[i].contains("key")) s.idempotent[log[i]["key"]] = {log[i].at("request").get<std::string>(), r};
        continue;
      }
      ApiResponse r = apply(s, op, log[i].at("body"));
      if (log[i].contains("key")) s.idempotent[log[i]["key"]] = {log[i].at("request").get<std::string>(), r};
    }
  }

  // --- handlers

  ApiResponse create_session(const json& body, const std::optional<std::string>& key) {
    const std::string request = canonical("create", body);
    if (key) {
      std::lock_guard lock(registry_mu);
      const auto it = create_keys.find(*key);
      if (it != create_keys.end()) {
        if (it->second.first != request) throw ConflictError("Idempotency-Key reused with a different request");
        return json_response(201, summary(*sessions.at(it->second.second)));
      }
    }
    const std::string dataset_id = body.at("dataset").get<std::string>();
    const auto manifest = dataset(dataset_id);
    const DatasetManifest& m = *manifest;
    std::vector<std::string> frames;
    if (body.contains("frames")) {
      frames = body["frames"].get<std::vector<std::string>>();
      for (const auto& f : frames) m.frame(f);
    } else {
      const int first = body.value("first", 0);
      const int count = body.value("count", 5);
      if (first < 0 || count < 1 || first >= static_cast<int>(m.frames.size())) {
        throw ValidationError("frame range [" + std::to_string(first) + ", +" + std::to_string(count) + ") is empty");
      }
      for (int i = first; i < std::min<int>(first + count, static_cast<int>(m.frames.size())); ++i) frames.push_back(m.frames[i].id);
    }
    if (frames.empty()) throw ValidationError("a session needs at least one frame");
    const json config = body.value("config", json::object());

    auto s = std::make_shared<SessionEntry>();
    s->id = random_token("s-");
    s->dataset = dataset_id;
    s->frames = frames;
    s->config = config;
    s->created = now_iso();
    s->log = sessions_dir() / (s->id + ".jsonl");
    s->session = build_session(dataset_id, frames, config);

    std::lock_guard lock(registry_mu);
    if (key) {
      // Another request with the same key may have finished first.
      const auto it = create_keys.find(*key);
      if (it != create_keys.end()) {
        if (it->second.first != request) throw ConflictError("Idempotency-Key reused with a different request");
        return json_response(201, summary(*sessions.at(it->second.second)));
      }
    }
    json line = {{"op", "create"}, {"session_id", s->id}, {"dataset", dataset_id}, {"frames", frames},
                 {"config", config}, {"created", s->created}};
    if (key) {
      line["key"] = *key;
      line["request"] = request;
      create_keys[*key] = {request, s->id};
    }
    append_line(s->log, line);
    sessions[s->id] = s;
    return json_response(201, summary(*s));
  }

  ApiResponse get_session(const std::string& id) {
    auto s = entry(id);
    {
      std::shared_lock lock(s->mu);
      if (s->session) return json_response(200, summary(*s));
    }
    std::unique_lock lock(s->mu);
    ensure_loaded(*s);
    return json_response(200, summary(*s));
  }

  ApiResponse mutate(const std::string& id, const std::string& op, const json& body, const std::optional<std::string>& key) {
    auto s = entry(id);
    std::unique_lock lock(s->mu, std::try_to_lock);
    if (!lock.owns_lock()) throw ConflictError("session '" + id + "' is being modified by another request");
    ensure_loaded(*s);
    const std::string request = canonical(op, body);
    if (key) {
      const auto it = s->idempotent.find(*key);
      if (it != s->idempotent.end()) {
        if (it->second.first != request) throw ConflictError("Idempotency-Key reused with a different request");
        return it->second.second;
      }
    }
    if (s->finalized) throw ConflictError("session '" + id + "' is finalized");

    ApiResponse r;
    json line = {{"op", op}};
    if (op == "finalize") {
      const ColorModel model = finalize_model(*s->session);
      const std::string model_id = random_token("m-");
      json doc = to_json(model);
      doc["model_id"] = model_id;
      doc["session_id"] = s->id;
      doc["dataset"] = s->dataset;
      write_text_file(models_dir() / (model_id + ".json"), doc.dump(2) + "\n");
      s->finalized = true;
      s->model_id = model_id;
      {
        std::lock_guard reg(registry_mu);
        models[model_id] = std::make_shared<const ColorModel>(model);
        model_dataset[model_id] = s->dataset;
      }
      line["model_id"] = model_id;
      r = json_response(201, {{"model_id", model_id}, {"session_id", s->id}});
    } else {
      try {
        r = apply(*s, op, body);
      } catch (const json::exception& e) {
        throw ValidationError(std::string("bad ") + op + " request: " + e.what());
      }
      line["body"] = body;
    }
    if (key) {
      line["key"] = *key;
      line["request"] = request;
      s->idempotent[*key] = {request, r};
    }
    append_line(s->log, line);
    return r;
  }

  std::shared_ptr<const ColorModel> model(const std::string& id) {
    std::lock_guard lock(registry_mu);
    const auto it = models.find(id);
    if (it != models.end()) return it->second;
    const fs::path path = models_dir() / (id + ".json");
    if (id.find('/') != std::string::npos || !fs::exists(path)) throw NotFoundError("unknown model '" + id + "'");
    const json doc = read_json_file(path);
    auto m = std::make_shared<const ColorModel>(color_model_from_json(doc, path.string()));
    models[id] = m;
    model_dataset[id] = doc.value("dataset", "");
    return m;
  }

  FrameEntry find_frame(const std::string& frame_id, const std::optional<std::string>& dataset_id) {
    if (dataset_id) return dataset(*dataset_id)->frame(frame_id);
    scan_datasets();
    std::lock_guard lock(registry_mu);
    const FrameEntry* found = nullptr;
    for (const auto& [id, m] : datasets) {
      for (const auto& f : m->frames) {
        if (f.id != frame_id) continue;
        if (found) throw ValidationError("frame id '" + frame_id + "' exists in several datasets; pass ?dataset=");
        found = &f;
      }
    }
    if (!found) throw NotFoundError("unknown frame '" + frame_id + "'");
    return *found;
  }

  ApiResponse detect(const std::string& model_id, const std::map<std::string, std::string>& query) {
    const auto m = model(model_id);
    const auto frame_it = query.find("frame");
    if (frame_it == query.end()) throw ValidationError("detect needs ?frame=");
    std::optional<std::string> dataset_id;
    if (const auto d = query.find("dataset"); d != query.end()) {
      dataset_id = d->second;
    } else {
      std::lock_guard lock(registry_mu);
      if (!model_dataset[model_id].empty()) dataset_id = model_dataset[model_id];
    }
    const FrameEntry frame = find_frame(frame_it->second, dataset_id);
    const RgbImage img = read_png_rgb(frame.path);
    const BinaryMask mask = detect_mask(img, *m);
    json dets = json::array();
    for (const auto& d : detections_from_mask(mask, m->config.min_area, frame.id)) dets.push_back(to_json(d));
    return json_response(200, {{"model_id", model_id}, {"frame", frame.id}, {"width", img.width()}, {"height", img.height()},
                               {"mask_rle", rle_to_json(rle_encode(mask))}, {"detections", dets}});
  }

  ApiResponse report(const std::string& dataset_id) {
    const auto mp = dataset(dataset_id);
    const DatasetManifest& m = *mp;
    const fs::path dir = m.frames.empty() ? opt.data_root : m.frames.front().path.parent_path();
    json out = {{"dataset", dataset_id}, {"yield", nullptr}, {"metrics", nullptr}, {"confusion", nullptr}};
    // Reports are published next to the manifest by the batch commands.
    for (const fs::path& base : {dir, dir.parent_path()}) {
      const fs::path rdir = base / "reports" / dataset_id;
      for (const char* name : {"yield", "metrics", "confusion"}) {
        const fs::path p = rdir / (std::string(name) + ".json");
        if (out[name].is_null() && fs::exists(p)) out[name] = read_json_file(p);
      }
    }
    if (m.harvested_count) out["harvested_count"] = *m.harvested_count;
    return json_response(200, out);
  }

  ApiResponse datasets_index() {
    scan_datasets();
    std::lock_guard lock(registry_mu);
    json list = json::array();
    for (const auto& [id, m] : datasets) {
      json frames = json::array();
      for (const auto& f : m->frames) frames.push_back(f.id);
      list.push_back({{"dataset", id}, {"side", to_string(m->side)}, {"frames", frames}});
    }
    return json_response(200, {{"datasets", list}});
  }

  ApiResponse route(const ApiRequest& req) {
    std::vector<std::string> parts;
    std::stringstream ss(req.path);
    for (std::string p; std::getline(ss, p, '/');) {
      if (!p.empty()) parts.push_back(p);
    }
    if (parts.empty() || parts[0] != "v1") throw NotFoundError("no route for " + req.path);
    parts.erase(parts.begin());
    const bool get = req.method == "GET";
    const bool post = req.method == "POST";
    const auto n = parts.size();

    if (n == 1 && parts[0] == "datasets" && get) return datasets_index();
    if (n >= 1 && parts[0] == "sessions") {
      if (n == 1 && post) return create_session(parse_body(req.body), req.idempotency_key);
      if (n == 2 && get) return get_session(parts[1]);
      if (n == 3 && post && (parts[2] == "click" || parts[2] == "label" || parts[2] == "finalize")) {
        return mutate(parts[1], parts[2], parts[2] == "finalize" ? json::object() : parse_body(req.body), req.idempotency_key);
      }
    }
    if (n >= 2 && parts[0] == "models") {
      if (n == 2 && get) {
        json doc = to_json(*model(parts[1]));
        doc["model_id"] = parts[1];
        return json_response(200, doc);
      }
      if (n == 3 && post && parts[2] == "detect") return detect(parts[1], req.query);
    }
    if (n == 2 && parts[0] == "frames" && get) {
      std::optional<std::string> ds;
      if (const auto it = req.query.find("dataset"); it != req.query.end()) ds = it->second;
      const FrameEntry f = find_frame(parts[1], ds);
      std::ifstream in(f.path, std::ios::binary);
      if (!in) throw IoError("cannot read frame file");
      std::ostringstream bytes;
      bytes << in.rdbuf();
      return {200, "image/png", bytes.str()};
    }
    if (n == 2 && parts[0] == "reports" && get) return report(parts[1]);
    throw NotFoundError("no route for " + req.method + " " + req.path);
  }
};

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>()) {
  if (options.state_dir.empty()) options.state_dir = options.data_root / ".yieldest";
  impl_->opt = std::move(options);
  impl_->scan_state();
  impl_->scan_datasets();
}

Service::~Service() = default;

const ServiceOptions& Service::options() const { return impl_->opt; }

ApiResponse Service::handle(const ApiRequest& request) {
  try {
    return impl_->route(request);
  } catch (const Error& e) {
    return error_response(status_for(e.kind()), e.kind(), e.what());
  } catch (const json::exception& e) {
    return error_response(422, "validation", e.what());
  } catch (const std::exception& e) {
    return error_response(500, "internal", e.what());
  }
}

void Service::mount(httplib::Server& server) {
  auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    ApiRequest r{req.method, req.path, {}, req.body, std::nullopt};
    for (const auto& [k, v] : req.params) r.query.emplace(k, v);
    if (req.has_header("Idempotency-Key")) r.idempotency_key = req.get_header_value("Idempotency-Key");
    const ApiResponse out = handle(r);
    res.status = out.status;
    res.set_content(out.body, out.content_type);
  };
  server.Get(R"(/v1/.*)", forward);
  server.Post(R"(/v1/.*)", forward);
  if (impl_->opt.ui_dir) server.set_mount_point("/", impl_->opt.ui_dir->string());
}

void serve(const ServiceOptions& options, const std::string& host, int port) {
  Service service(options);
  httplib::Server server;
  service.mount(server);
  if (!server.listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace yieldest
