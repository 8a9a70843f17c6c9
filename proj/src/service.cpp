#include "alchemy/service.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <shared_mutex>

#include "alchemy/engine.hpp"
#include "alchemy/harness.hpp"
#include "alchemy/trial_log.hpp"

// After Eigen: <resolv.h>, pulled in by httplib, defines a macro named _res.
#include <httplib.h>

namespace alchemy {
namespace {

struct LiveSession {
  std::string id;
  std::string mode;
  SessionState state;
  std::filesystem::path checkpoint;
  mutable std::mutex mu;

  LiveSession(std::string id_, std::string mode_, SessionState s, std::filesystem::path cp)
      : id(std::move(id_)), mode(std::move(mode_)), state(std::move(s)), checkpoint(std::move(cp)) {}
};

nlohmann::json names_of(const RecipeGraph& g, const std::vector<ElementId>& ids) {
  nlohmann::json out = nlohmann::json::array();
  for (ElementId e : ids) out.push_back(g.element(e).name);
  return out;
}

std::string format_id(std::uint64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%06llu", static_cast<unsigned long long>(n));
  return buf;
}

void append_line(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  out << to_jsonl_line(j);
  out.flush();
  if (!out) throw Error("cannot append to checkpoint " + path.string());
}

}  // namespace

struct SessionRegistry::Impl {
  ServiceOptions options;
  RecipeGraph graph;
  mutable std::shared_mutex mu;
  std::map<std::string, std::shared_ptr<LiveSession>> sessions;
  std::uint64_t next_id = 1;
  std::size_t recovered = 0;

  explicit Impl(ServiceOptions o) : options(std::move(o)), graph(resolve_graph(options.default_graph)) {}

  std::shared_ptr<LiveSession> find(const std::string& id) const {
    std::shared_lock lock(mu);
    auto it = sessions.find(id);
    if (it == sessions.end()) throw SessionNotFound("no session '" + id + "'");
    return it->second;
  }

  void recover() {
    if (options.checkpoint_dir.empty()) return;
    std::filesystem::create_directories(options.checkpoint_dir);
    std::vector<std::filesystem::path> logs;
    for (const auto& entry : std::filesystem::directory_iterator(options.checkpoint_dir)) {
      if (entry.path().extension() == ".jsonl") logs.push_back(entry.path());
    }
    std::sort(logs.begin(), logs.end());
    for (const auto& path : logs) {
      try {
        auto state = replay_session(path, graph);
        const auto header = read_trial_log(path).header;
        const auto id = path.stem().string();
        sessions.emplace(id, std::make_shared<LiveSession>(id, header.agent, std::move(state), path));
        if (id.size() > 1 && id[0] == 's') {
          next_id = std::max<std::uint64_t>(next_id, std::stoull(id.substr(1)) + 1);
        }
        ++recovered;
      } catch (const std::exception& e) {
        std::cerr << "skipping checkpoint " << path << ": " << e.what() << "\n";
      }
    }
  }
};

SessionRegistry::SessionRegistry(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {
  impl_->recover();
}

SessionRegistry::~SessionRegistry() = default;

const RecipeGraph& SessionRegistry::graph() const { return impl_->graph; }
const ServiceOptions& SessionRegistry::options() const { return impl_->options; }
std::size_t SessionRegistry::recovered() const { return impl_->recovered; }

nlohmann::json SessionRegistry::create(const nlohmann::json& body) {
  if (!body.is_object()) throw ValidationError("request body must be a JSON object");
  const auto mode = body.value("mode", std::string("human"));
  if (mode != "human" && mode != "agent") throw ValidationError("mode must be 'human' or 'agent'");
  const auto graph = body.value("graph", std::string("default"));
  if (graph != "default") throw ValidationError("unknown graph '" + graph + "'; this server serves 'default'");
  if (body.contains("seed") && !(body["seed"].is_number_integer() && body["seed"].get<std::int64_t>() >= 0)) {
    throw ValidationError("seed must be a non-negative integer");
  }

  std::unique_lock lock(impl_->mu);
  const auto n = impl_->next_id++;
  const auto id = format_id(n);
  const std::uint64_t seed = body.contains("seed") ? body["seed"].get<std::uint64_t>() : n;
  SessionState state(impl_->graph, seed, SessionConfig{impl_->options.max_trials});
  std::filesystem::path checkpoint;
  if (!impl_->options.checkpoint_dir.empty()) {
    checkpoint = impl_->options.checkpoint_dir / (id + ".jsonl");
    SessionHeader header{impl_->graph.content_hash(), seed, impl_->options.max_trials, id, mode, 0.0, 0};
    std::ofstream(checkpoint, std::ios::binary | std::ios::trunc) << to_jsonl_line(to_json(header));
  }
  impl_->sessions.emplace(id, std::make_shared<LiveSession>(id, mode, std::move(state), checkpoint));
  return {{"session_id", id}};
}

nlohmann::json SessionRegistry::get(const std::string& id) const {
  auto s = impl_->find(id);
  std::lock_guard lock(s->mu);
  const auto summary = session_summary(s->state);
  return {{"session_id", id},
          {"mode", s->mode},
          {"inventory", names_of(impl_->graph, s->state.inventory())},
          {"trials", summary.trials},
          {"discoveries", summary.discoveries},
          {"closed", s->state.closed()}};
}

nlohmann::json SessionRegistry::combine(const std::string& id, const nlohmann::json& body) {
  if (!body.is_object() || !body.contains("a") || !body.contains("b") || !body["a"].is_string() ||
      !body["b"].is_string()) {
    throw ValidationError("body must be {\"a\": element, \"b\": element}");
  }
  auto s = impl_->find(id);
  std::lock_guard lock(s->mu);
  const auto& rec = s->state.apply(body["a"].get<std::string>(), body["b"].get<std::string>());
  auto j = to_json(rec, &impl_->graph);
  if (!s->checkpoint.empty()) append_line(s->checkpoint, j);
  return j;
}

nlohmann::json SessionRegistry::history(const std::string& id, std::size_t offset, std::size_t limit) const {
  auto s = impl_->find(id);
  std::lock_guard lock(s->mu);
  const auto& h = s->state.history();
  nlohmann::json records = nlohmann::json::array();
  for (std::size_t i = offset; i < h.size() && i - offset < limit; ++i) records.push_back(to_json(h[i], &impl_->graph));
  return {{"session_id", id}, {"total", h.size()}, {"offset", offset}, {"records", records}};
}

nlohmann::json SessionRegistry::elements() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : impl_->graph.elements()) {
    nlohmann::json j{{"id", e.id}, {"name", e.name}, {"initial", e.is_initial}};
    if (e.category) j["category"] = *e.category;
    out.push_back(j);
  }
  return out;
}

nlohmann::json SessionRegistry::metrics(const std::string& id) const {
  auto s = impl_->find(id);
  std::lock_guard lock(s->mu);
  const auto summary = session_summary(s->state);
  nlohmann::json categories = nlohmann::json::object();
  for (auto c : kAllCategories) {
    auto it = summary.category_counts.find(c);
    categories[std::string(to_string(c))] = it == summary.category_counts.end() ? 0 : it->second;
  }
  return {{"session_id", id},
          {"trials", summary.trials},
          {"discoveries", summary.discoveries},
          {"inventory_size", summary.inventory_size},
          {"categories", categories}};
}

struct HttpService::Impl {
  SessionRegistry registry;
  httplib::Server server;

  explicit Impl(ServiceOptions options) : registry(std::move(options)) { routes(); }

  static void send(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void fail(httplib::Response& res, int status, const std::string& error, const std::string& detail) {
    send(res, status, {{"error", error}, {"detail", detail}});
  }

  template <typename Fn>
  void guarded(const httplib::Request& req, httplib::Response& res, Fn&& fn) {
    const auto& token = registry.options().token;
    if (!token.empty() && req.get_header_value("Authorization") != "Bearer " + token) {
      fail(res, 401, "unauthorized", "missing or wrong bearer token");
      return;
    }
    try {
      send(res, 200, fn());
    } catch (const SessionNotFound& e) {
      fail(res, 404, "not_found", e.what());
    } catch (const SessionClosed& e) {
      fail(res, 409, "session_closed", e.what());
    } catch (const nlohmann::json::exception& e) {
      fail(res, 400, "bad_request", e.what());
    } catch (const ValidationError& e) {
      fail(res, 400, "bad_request", e.what());
    } catch (const UnknownElement& e) {
      fail(res, 400, "unknown_element", e.what());
    } catch (const std::exception& e) {
      fail(res, 500, "internal", e.what());
    }
  }

  static nlohmann::json body_of(const httplib::Request& req) {
    if (req.body.empty()) return nlohmann::json::object();
    try {
      return nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("body is not JSON: ") + e.what());
    }
  }

  static std::size_t query_size(const httplib::Request& req, const char* key, std::size_t fallback) {
    if (!req.has_param(key)) return fallback;
    const auto v = req.get_param_value(key);
    try {
      std::size_t used = 0;
      const auto n = std::stoull(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return n;
    } catch (const std::exception&) {
      throw ValidationError(std::string(key) + " must be a non-negative integer");
    }
  }

  void routes() {
    server.Post("/api/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(req, res, [&] { return registry.create(body_of(req)); });
    });
    server.Get(R"(/api/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(req, res, [&] { return registry.get(req.matches[1]); });
    });
    server.Post(R"(/api/sessions/([^/]+)/combine)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(req, res, [&] { return registry.combine(req.matches[1], body_of(req)); });
    });
    server.Get(R"(/api/sessions/([^/]+)/history)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(req, res, [&] {
        const auto limit = std::min<std::size_t>(query_size(req, "limit", 100), 1000);
        return registry.history(req.matches[1], query_size(req, "offset", 0), limit);
      });
    });
    server.Get(R"(/api/sessions/([^/]+)/metrics)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(req, res, [&] { return registry.metrics(req.matches[1]); });
    });
    server.Get("/api/elements", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(req, res, [&] { return registry.elements(); });
    });
    if (const auto& dir = registry.options().static_dir) server.set_mount_point("/", dir->string());
  }
};

HttpService::HttpService(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}
HttpService::~HttpService() { stop(); }

SessionRegistry& HttpService::registry() { return impl_->registry; }
int HttpService::bind_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }
bool HttpService::bind(const std::string& host, int port) { return impl_->server.bind_to_port(host, port); }
void HttpService::listen() { impl_->server.listen_after_bind(); }
void HttpService::stop() {
  if (impl_) impl_->server.stop();
}
void HttpService::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace alchemy
