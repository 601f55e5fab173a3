#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>

#include "json.hpp"
#include "talents/core/error.hpp"

namespace talents::service {

using json = nlohmann::json;

/// Checkpoints for one layout.
struct CheckpointPaths {
  std::string vae, clusters, talents, best_response;
};

struct ServiceConfig {
  std::string bind = "127.0.0.1";
  int port = 8080;
  int threads = 1;
  int tick_ms = 150;
  int rate_cap = 2;
  int grace_ms = 10000;
  bool expose_belief = false;
  std::string data_dir = "sessions";
  std::string static_dir = "web/dist";
  // <root>/<layout>/{vae.ckpt, clusters.json, talents.policy, br.policy}
  std::string checkpoint_root = "checkpoints";
  std::map<std::string, CheckpointPaths> checkpoints;  // per-layout overrides of the root convention

  CheckpointPaths paths_for(const std::string& layout) const {
    const auto dir = std::filesystem::path(checkpoint_root) / layout;
    CheckpointPaths p{(dir / "vae.ckpt").string(), (dir / "clusters.json").string(), (dir / "talents.policy").string(),
                      (dir / "br.policy").string()};
    if (const auto it = checkpoints.find(layout); it != checkpoints.end()) {
      if (!it->second.vae.empty()) p.vae = it->second.vae;
      if (!it->second.clusters.empty()) p.clusters = it->second.clusters;
      if (!it->second.talents.empty()) p.talents = it->second.talents;
      if (!it->second.best_response.empty()) p.best_response = it->second.best_response;
    }
    return p;
  }

  json to_json() const {
    json cps = json::object();
    for (const auto& [l, p] : checkpoints)
      cps[l] = {{"vae", p.vae}, {"clusters", p.clusters}, {"talents", p.talents}, {"best_response", p.best_response}};
    return {{"bind", bind},           {"port", port},
            {"threads", threads},     {"tick_ms", tick_ms},
            {"rate_cap", rate_cap},   {"grace_ms", grace_ms},
            {"expose_belief", expose_belief}, {"data_dir", data_dir},
            {"static_dir", static_dir}, {"checkpoint_root", checkpoint_root},
            {"checkpoints", cps}};
  }
};

inline ServiceConfig config_from_json(const json& j) {
  ServiceConfig c;
  try {
    c.bind = j.value("bind", c.bind);
    c.port = j.value("port", c.port);
    c.threads = j.value("threads", c.threads);
    c.tick_ms = j.value("tick_ms", c.tick_ms);
    c.rate_cap = j.value("rate_cap", c.rate_cap);
    c.grace_ms = j.value("grace_ms", c.grace_ms);
    c.expose_belief = j.value("expose_belief", c.expose_belief);
    c.data_dir = j.value("data_dir", c.data_dir);
    c.static_dir = j.value("static_dir", c.static_dir);
    c.checkpoint_root = j.value("checkpoint_root", c.checkpoint_root);
    const json cps = j.value("checkpoints", json::object());
    for (const auto& [layout, p] : cps.items())
      c.checkpoints[layout] = {p.value("vae", ""), p.value("clusters", ""), p.value("talents", ""),
                               p.value("best_response", "")};
  } catch (const json::exception& e) {
    throw ConfigError(std::string("service config: ") + e.what());
  }
  return c;
}

inline ServiceConfig load_service_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open service config " + path);
  try {
    return config_from_json(json::parse(f));
  } catch (const json::parse_error& e) {
    throw ConfigError("service config " + path + ": " + e.what());
  }
}

using EnvLookup = std::function<const char*(const char*)>;

/// Environment overrides: TALENTS_BIND, TALENTS_PORT, TALENTS_THREADS,
/// TALENTS_TICK_MS, TALENTS_RATE_CAP, TALENTS_GRACE_MS, TALENTS_EXPOSE_BELIEF,
/// TALENTS_DATA_DIR, TALENTS_STATIC_DIR, TALENTS_CHECKPOINT_ROOT.
inline void apply_env(ServiceConfig& c, const EnvLookup& env = [](const char* k) { return std::getenv(k); }) {
  auto str = [&](const char* k, std::string& out) {
    if (const char* v = env(k)) out = v;
  };
  auto num = [&](const char* k, int& out) {
    if (const char* v = env(k)) {
      try {
        std::size_t used = 0;
        out = std::stoi(v, &used);
        if (v[used] != '\0') throw std::invalid_argument(v);
      } catch (const std::exception&) {
        throw ConfigError(std::string(k) + " must be an integer, got '" + v + "'");
      }
    }
  };
  str("TALENTS_BIND", c.bind);
  num("TALENTS_PORT", c.port);
  num("TALENTS_THREADS", c.threads);
  num("TALENTS_TICK_MS", c.tick_ms);
  num("TALENTS_RATE_CAP", c.rate_cap);
  num("TALENTS_GRACE_MS", c.grace_ms);
  if (const char* v = env("TALENTS_EXPOSE_BELIEF")) {
    const std::string s = v;
    if (s == "1" || s == "true") c.expose_belief = true;
    else if (s == "0" || s == "false") c.expose_belief = false;
    else throw ConfigError("TALENTS_EXPOSE_BELIEF must be true/false/1/0");
  }
  str("TALENTS_DATA_DIR", c.data_dir);
  str("TALENTS_STATIC_DIR", c.static_dir);
  str("TALENTS_CHECKPOINT_ROOT", c.checkpoint_root);
}

}  // namespace talents::service
