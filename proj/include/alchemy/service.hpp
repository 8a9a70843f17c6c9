#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "alchemy/error.hpp"
#include "alchemy/recipes.hpp"

namespace alchemy {

class SessionNotFound : public Error {
 public:
  using Error::Error;
};

struct ServiceOptions {
  std::string default_graph = "g4";  // resolve_graph spec
  // Every session appends its trial log here; sessions found on startup are
  // replayed back into memory. Empty disables persistence.
  std::filesystem::path checkpoint_dir;
  std::optional<std::filesystem::path> static_dir;
  std::size_t max_trials = 0;  // 0 = unbounded
  // When non-empty, requests need "Authorization: Bearer <token>".
  std::string token;
};

// In-memory sessions behind the HTTP API. Methods take and return the JSON
// bodies of the corresponding endpoints and throw ValidationError (400),
// SessionNotFound (404) or SessionClosed (409).
class SessionRegistry {
 public:
  explicit SessionRegistry(ServiceOptions options);
  ~SessionRegistry();

  nlohmann::json create(const nlohmann::json& body);
  nlohmann::json get(const std::string& id) const;
  nlohmann::json combine(const std::string& id, const nlohmann::json& body);
  nlohmann::json history(const std::string& id, std::size_t offset, std::size_t limit) const;
  nlohmann::json elements() const;
  nlohmann::json metrics(const std::string& id) const;

  const RecipeGraph& graph() const;
  const ServiceOptions& options() const;
  std::size_t recovered() const;  // sessions restored from checkpoints

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

class HttpService {
 public:
  explicit HttpService(ServiceOptions options);
  ~HttpService();

  SessionRegistry& registry();
  // Binds to an ephemeral port and returns it; follow with listen().
  int bind_any_port(const std::string& host);
  bool bind(const std::string& host, int port);
  // Blocks until stop().
  void listen();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace alchemy
