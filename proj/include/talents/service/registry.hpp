#pragma once

#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "talents/eval/experiments.hpp"
#include "talents/service/config.hpp"
#include "talents/service/session.hpp"

namespace talents::service {

using AgentFactory = std::function<std::unique_ptr<partners::Agent>(const SessionOptions&)>;

/// Builds agent runtimes from the configured checkpoints, loading each
/// layout's assets once.
class CheckpointAgentFactory {
 public:
  explicit CheckpointAgentFactory(ServiceConfig cfg) : st_(std::make_shared<State>()) { st_->cfg = std::move(cfg); }

  std::unique_ptr<partners::Agent> operator()(const SessionOptions& o) {
    eval::AgentKind kind;
    try {
      kind = eval::parse_agent(o.agent);
    } catch (const ConfigError& e) {
      throw Rejected(e.what());
    }
    return eval::make_agent(assets(o.layout, kind), kind);
  }

 private:
  const eval::Assets& assets(const std::string& layout, eval::AgentKind kind) {
    std::lock_guard lock(st_->mu);
    auto& a = st_->cache[layout];
    const auto p = st_->cfg.paths_for(layout);
    auto need = [](const std::string& path, const char* what) {
      if (!std::filesystem::exists(path)) throw Rejected(std::string("missing ") + what + " checkpoint " + path);
    };
    try {
      if (kind == eval::AgentKind::best_response) {
        if (!a.best_response) {
          need(p.best_response, "best-response");
          a.best_response = std::make_shared<const cooperator::CooperatorPolicy>(cooperator::load_policy(p.best_response));
        }
      } else if (!a.talents) {
        need(p.talents, "policy");
        need(p.vae, "decoder");
        need(p.clusters, "cluster");
        auto dec = std::make_shared<const strategy::VaeModel<float>>(strategy::load_vae<float>(p.vae));
        auto clusters = strategy::load_clusters(p.clusters);
        auto pol = std::make_shared<const cooperator::CooperatorPolicy>(cooperator::load_policy(p.talents));
        adaptation::check_dimensions(clusters, *pol, *dec);
        a.dec = std::move(dec);
        a.clusters = std::move(clusters);
        a.talents = std::move(pol);
      }
    } catch (const FormatError& e) {
      throw Rejected(std::string("unusable checkpoint: ") + e.what());
    } catch (const ConfigError& e) {
      throw Rejected(std::string("unusable checkpoint: ") + e.what());
    }
    return a;
  }

  // Shared so copies (e.g. inside std::function) reuse one cache.
  struct State {
    ServiceConfig cfg;
    std::mutex mu;
    std::map<std::string, eval::Assets> cache;
  };
  std::shared_ptr<State> st_;
};

/// All sessions of one server, behind a single lock. Sessions themselves are
/// independently synchronized.
class Registry {
 public:
  Registry(AgentFactory factory, std::string data_dir) : factory_(std::move(factory)), data_dir_(std::move(data_dir)) {}

  std::shared_ptr<Session> create(const SessionOptions& o) {
    o.validate();
    try {
      kitchen::builtin_layout(o.layout);
    } catch (const ConfigError& e) {
      throw Rejected(e.what());
    }
    auto agent = factory_(o);
    std::lock_guard lock(mu_);
    char buf[16];
    std::snprintf(buf, sizeof buf, "s%04d", ++counter_);
    auto s = std::make_shared<Session>(buf, o, std::move(agent));
    sessions_[s->id()] = s;
    return s;
  }

  std::shared_ptr<Session> get(const std::string& id) const {
    std::lock_guard lock(mu_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Rejected("unknown session " + id);
    return it->second;
  }

  json list() const {
    std::lock_guard lock(mu_);
    json out = json::array();
    for (const auto& [id, s] : sessions_) out.push_back(s->info());
    return out;
  }

  /// Replay of a finished session, from memory or from the data directory.
  json replay(const std::string& id) const {
    {
      std::lock_guard lock(mu_);
      const auto it = sessions_.find(id);
      if (it != sessions_.end()) {
        if (it->second->status() != Status::finished) throw Rejected("session " + id + " has not finished");
        return it->second->replay();
      }
    }
    const auto path = std::filesystem::path(data_dir_) / (id + ".replay.json");
    std::ifstream f(path);
    if (!f) throw Rejected("unknown session " + id);
    return json::parse(f);
  }

  /// Called once a session finishes; writes its trajectory and replay.
  void persist(const Session& s) const {
    if (!data_dir_.empty()) s.persist(data_dir_);
  }

  const std::string& data_dir() const { return data_dir_; }

 private:
  AgentFactory factory_;
  std::string data_dir_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  int counter_ = 0;
};

}  // namespace talents::service
