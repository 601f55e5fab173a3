#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "talents/adaptation/adapter.hpp"
#include "talents/eval/stats.hpp"
#include "talents/partners/agent.hpp"

namespace talents::eval {

namespace fs = std::filesystem;
using json = nlohmann::json;
using cooperator::CooperatorPolicy;
using cooperator::DecoderPtr;
using strategy::StrategyCluster;

enum class AgentKind { talents, talents_static, best_response };

inline AgentKind parse_agent(const std::string& s) {
  if (s == "talents") return AgentKind::talents;
  if (s == "talents-static") return AgentKind::talents_static;
  if (s == "best-response" || s == "best-response-unconditioned" || s == "br") return AgentKind::best_response;
  throw ConfigError("unknown agent '" + s + "' (expected talents, talents-static or best-response)");
}

inline std::string agent_name(AgentKind k) {
  switch (k) {
    case AgentKind::talents: return "talents";
    case AgentKind::talents_static: return "talents-static";
    default: return "best-response";
  }
}

/// Trained artifacts for one layout.
struct Assets {
  DecoderPtr dec;
  std::vector<StrategyCluster> clusters;
  std::shared_ptr<const CooperatorPolicy> talents;        // conditioned policy
  std::shared_ptr<const CooperatorPolicy> best_response;  // unconditioned policy
  double eta = adaptation::kDefaultEta;
  double alpha = adaptation::kDefaultAlpha;
};

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Each call writes
/// only its own slot, so results do not depend on the worker count.
template <class Fn>
void fan_out(int n, int workers, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < std::min(workers, n); ++w)
    pool.emplace_back([&] {
      for (int i; (i = next++) < n;) fn(i);
    });
  for (auto& t : pool) t.join();
}

inline std::unique_ptr<partners::Agent> make_agent(const Assets& a, AgentKind kind) {
  if (kind == AgentKind::best_response) {
    if (!a.best_response) throw ConfigError("best-response agent needs a best-response policy checkpoint");
    return std::make_unique<adaptation::FixedCooperatorAgent>(a.best_response, 0, agent_name(kind));
  }
  if (!a.talents) throw ConfigError(agent_name(kind) + " agent needs a conditioned policy checkpoint");
  if (!a.dec) throw ConfigError(agent_name(kind) + " agent needs a decoder checkpoint");
  if (a.clusters.empty()) throw ConfigError(agent_name(kind) + " agent needs a cluster file");
  adaptation::TalentsAgent::Options o;
  o.eta = a.eta;
  o.alpha = a.alpha;
  o.static_belief = kind == AgentKind::talents_static;
  o.name = agent_name(kind);
  return std::make_unique<adaptation::TalentsAgent>(a.talents, a.clusters, a.dec, o);
}

/// One evaluated episode.
struct EvalEpisode {
  std::string agent, partner, partner_b, layout;
  int episode = 0;
  std::uint64_t seed = 0;
  int agent_seat = 0;
  int score = 0;
  int first_half = 0, second_half = 0;  // team reward before / from tick T/2
  std::vector<adaptation::BeliefRecord> belief;

  json to_json() const {
    json b = json::array();
    for (const auto& r : belief) b.push_back({{"tick", r.tick}, {"w", r.w}, {"leader", r.leader}, {"losses", r.losses}});
    return {{"agent", agent},   {"partner", partner},       {"partner_b", partner_b},     {"layout", layout},
            {"episode", episode}, {"seed", seed},           {"agent_seat", agent_seat},   {"score", score},
            {"first_half", first_half}, {"second_half", second_half}, {"belief", b}};
  }
  static EvalEpisode from_json(const json& j) {
    EvalEpisode e;
    e.agent = j.at("agent").get<std::string>();
    e.partner = j.at("partner").get<std::string>();
    e.partner_b = j.value("partner_b", "");
    e.layout = j.at("layout").get<std::string>();
    e.episode = j.at("episode").get<int>();
    e.seed = j.at("seed").get<std::uint64_t>();
    e.agent_seat = j.at("agent_seat").get<int>();
    e.score = j.at("score").get<int>();
    e.first_half = j.at("first_half").get<int>();
    e.second_half = j.at("second_half").get<int>();
    for (const auto& r : j.at("belief"))
      e.belief.push_back({r.at("tick").get<int>(), r.at("w").get<std::vector<double>>(), r.at("leader").get<int>(),
                          r.at("losses").get<std::vector<double>>(), -1});
    return e;
  }
};

/// Statements every report header carries about the desk-scale setup.
inline json desk_scale_header() {
  return {{"partners", "scripted behavior-preference partners replace reinforcement-learned partner populations"},
          {"population_axis", "one scripted population; the three-population average collapses to a single set"},
          {"magnitudes", "absolute scores are not comparable to large-scale results; only orderings are asserted"}};
}

struct EvalReport {
  std::string experiment;  // holdout | switch | grid
  std::string agent;
  std::uint64_t seed = 0;
  std::string config_hash;
  json meta = json::object();
  std::vector<EvalEpisode> episodes;

  std::vector<double> scores() const {
    std::vector<double> out;
    for (const auto& e : episodes) out.push_back(e.score);
    return out;
  }
  std::vector<double> second_halves() const {
    std::vector<double> out;
    for (const auto& e : episodes) out.push_back(e.second_half);
    return out;
  }
  std::vector<double> first_halves() const {
    std::vector<double> out;
    for (const auto& e : episodes) out.push_back(e.first_half);
    return out;
  }

  /// Summary statistics, recomputed from the episode records.
  json summary() const {
    json by = json::object();
    std::map<std::string, std::vector<const EvalEpisode*>> groups;
    for (const auto& e : episodes) groups[e.layout + "/" + e.partner + (e.partner_b.empty() ? "" : ">" + e.partner_b)].push_back(&e);
    for (const auto& [key, es] : groups) {
      std::vector<double> s, f, h;
      for (const auto* e : es) {
        s.push_back(e->score);
        f.push_back(e->first_half);
        h.push_back(e->second_half);
      }
      by[key] = {{"n", s.size()}, {"mean", mean(s)}, {"sd", stddev(s)}, {"first_half_mean", mean(f)}, {"second_half_mean", mean(h)}};
    }
    const auto s = scores();
    return {{"experiment", experiment},
            {"agent", agent},
            {"seed", seed},
            {"config_hash", config_hash},
            {"desk_scale", desk_scale_header()},
            {"meta", meta},
            {"episodes", episodes.size()},
            {"mean", mean(s)},
            {"sd", stddev(s)},
            {"first_half_mean", mean(first_halves())},
            {"second_half_mean", mean(second_halves())},
            {"groups", by}};
  }
};

/// Writes `<dir>/<experiment>-<agent>.jsonl` (one episode per line) and the
/// matching `.summary.json`.
inline void write_report(const std::string& dir, const EvalReport& r) {
  fs::create_directories(dir);
  const std::string stem = (fs::path(dir) / (r.experiment + "-" + r.agent)).string();
  std::ofstream rec(stem + ".jsonl");
  if (!rec) throw IoError("cannot write " + stem + ".jsonl");
  for (const auto& e : r.episodes) rec << e.to_json().dump() << '\n';
  std::ofstream sum(stem + ".summary.json");
  if (!sum) throw IoError("cannot write " + stem + ".summary.json");
  sum << r.summary().dump(2) << '\n';
}

inline EvalReport read_report(const std::string& jsonl_path) {
  std::ifstream f(jsonl_path);
  if (!f) throw IoError("cannot open " + jsonl_path);
  EvalReport r;
  std::string line;
  while (std::getline(f, line))
    if (!line.empty()) r.episodes.push_back(EvalEpisode::from_json(json::parse(line)));
  const std::string sp = jsonl_path.substr(0, jsonl_path.size() - 6) + ".summary.json";
  if (std::ifstream s(sp); s) {
    const json j = json::parse(s);
    r.experiment = j.value("experiment", "");
    r.agent = j.value("agent", "");
    r.seed = j.value("seed", std::uint64_t{0});
    r.config_hash = j.value("config_hash", "");
    r.meta = j.value("meta", json::object());
  }
  return r;
}

/// Plays one episode with the evaluated agent on `agent_seat` and fills the
/// per-half rewards and belief trace.
inline EvalEpisode run_episode(partners::Agent& agent, partners::Agent& partner, const kitchen::LayoutPtr& layout,
                               int agent_seat, std::uint64_t seed, partners::Agent* switch_to = nullptr) {
  partners::EpisodeOptions eo;
  eo.record = true;
  partners::Agent& a0 = agent_seat == 0 ? agent : partner;
  partners::Agent& a1 = agent_seat == 0 ? partner : agent;
  const int T = kitchen::initial_state(layout, seed).episode_length;
  if (switch_to) {
    require(agent_seat == 0, "run_episode: partner switches are supported on seat 1 only");
    eo.switch_to = switch_to;
    eo.switch_tick = T / 2;
  }
  const auto t = partners::play_episode(a0, a1, layout, seed, eo);
  EvalEpisode e;
  e.agent = agent.id();
  e.partner = partner.id();
  e.partner_b = switch_to ? switch_to->id() : "";
  e.layout = layout->name;
  e.seed = seed;
  e.agent_seat = agent_seat;
  e.score = t.score;
  for (const auto& st : t.steps) (st.tick < T / 2 ? e.first_half : e.second_half) += st.reward[0];
  if (const auto* ta = dynamic_cast<const adaptation::TalentsAgent*>(&agent)) e.belief = ta->trace();
  return e;
}

/// Held-out evaluation: every (layout, partner, episode) with the agent's
/// seat alternating between episodes. Seeds depend on (seed, layout,
/// partner index, episode) only, so reports for different agents pair up.
inline EvalReport eval_vs_holdout(const std::map<std::string, Assets>& assets, AgentKind kind,
                                  const std::vector<partners::ScriptedPolicy>& holdout,
                                  const std::vector<std::string>& layouts, int episodes, std::uint64_t seed,
                                  bool keep_belief = false, int workers = 1) {
  EvalReport r;
  r.experiment = "holdout";
  r.agent = agent_name(kind);
  r.seed = seed;
  for (const auto& l : layouts)
    if (!assets.contains(l)) throw ConfigError("no trained assets for layout " + l);
  const int P = static_cast<int>(holdout.size()), L = static_cast<int>(layouts.size());
  r.episodes.resize(static_cast<std::size_t>(L * P * episodes));
  fan_out(L * P * episodes, workers, [&](int idx) {
    const auto li = static_cast<std::uint64_t>(idx / (P * episodes));
    const auto pi = static_cast<std::uint64_t>(idx / episodes % P);
    const int e = idx % episodes;
    auto agent = make_agent(assets.at(layouts[li]), kind);
    partners::ScriptedPolicy partner = holdout[pi];
    const std::uint64_t s = derive_seed(seed, (li << 32) ^ (pi << 16) ^ static_cast<std::uint64_t>(e));
    EvalEpisode ep = run_episode(*agent, partner, kitchen::builtin_layout(layouts[li]), e % 2, s);
    ep.episode = e;
    if (!keep_belief) ep.belief.clear();
    r.episodes[static_cast<std::size_t>(idx)] = std::move(ep);
  });
  r.meta = {{"layouts", layouts}, {"episodes_per_pair", episodes}, {"partners", [&] {
              std::vector<std::string> ids;
              for (const auto& p : holdout) ids.push_back(p.id());
              return ids;
            }()}};
  r.config_hash = hex64(hash_string(r.meta.dump() + r.agent + std::to_string(seed)));
  return r;
}

/// Partner A for ticks [0, T/2), partner B from T/2; the agent sits in seat 0.
inline EvalReport partner_switch_experiment(const Assets& assets, AgentKind kind, const partners::ScriptedPolicy& a,
                                            const partners::ScriptedPolicy& b, const std::string& layout_name,
                                            int episodes, std::uint64_t seed, int workers = 1) {
  EvalReport r;
  r.experiment = "switch";
  r.agent = agent_name(kind);
  r.seed = seed;
  const auto layout = kitchen::builtin_layout(layout_name);
  make_agent(assets, kind);  // fail fast on missing assets
  r.episodes.resize(static_cast<std::size_t>(episodes));
  fan_out(episodes, workers, [&](int e) {
    auto agent = make_agent(assets, kind);
    partners::ScriptedPolicy pa = a, pb = b;
    EvalEpisode ep = run_episode(*agent, pa, layout, 0, derive_seed(seed, static_cast<std::uint64_t>(e)), &pb);
    ep.episode = e;
    r.episodes[static_cast<std::size_t>(e)] = std::move(ep);
  });
  r.meta = {{"layout", layout_name}, {"partner_a", a.id()}, {"partner_b", b.id()}, {"episodes", episodes}};
  r.config_hash = hex64(hash_string(r.meta.dump() + r.agent + std::to_string(seed)));
  return r;
}

/// Belief weight on `cluster` at the last trace record with tick <= `tick`.
inline double belief_at(const EvalEpisode& e, int tick, int cluster) {
  double w = -1.0;
  for (const auto& r : e.belief) {
    if (r.tick > tick) break;
    w = r.w[static_cast<std::size_t>(cluster)];
  }
  return w;
}

struct GridResult {
  int K = 0;
  Eigen::MatrixXd mean;                          // (conditioning i, partner cluster j)
  std::vector<std::vector<std::vector<double>>> returns;  // [i][j] per-episode scores
};

/// Entry (i, j): mean score conditioning on cluster i against generative
/// partners sampled from cluster j. Seeds depend on (j, episode) only, so
/// each column shares its partners across rows.
inline GridResult cross_condition_grid(std::shared_ptr<const CooperatorPolicy> policy,
                                       const std::vector<StrategyCluster>& clusters, DecoderPtr dec,
                                       const std::string& layout_name, int episodes, std::uint64_t seed,
                                       int workers = 1) {
  require(policy && policy->K == static_cast<int>(clusters.size()), "cross_condition_grid: policy and clusters disagree");
  const int K = static_cast<int>(clusters.size());
  const auto layout = kitchen::builtin_layout(layout_name);
  GridResult g;
  g.K = K;
  g.mean = Eigen::MatrixXd::Zero(K, K);
  g.returns.assign(static_cast<std::size_t>(K), std::vector<std::vector<double>>(static_cast<std::size_t>(K)));
  for (auto& row : g.returns)
    for (auto& cell : row) cell.assign(static_cast<std::size_t>(episodes), 0.0);
  fan_out(K * K * episodes, workers, [&](int idx) {
    const int j = idx / (K * episodes), i = idx / episodes % K, e = idx % episodes;
    std::vector<double> onehot(static_cast<std::size_t>(K), 0.0);
    onehot[static_cast<std::size_t>(j)] = 1.0;
    const std::uint64_t s = derive_seed(seed, (static_cast<std::uint64_t>(j) << 32) ^ static_cast<std::uint64_t>(e));
    auto partner = cooperator::sample_partner(clusters, onehot, dec, derive_seed(s, 5));
    adaptation::FixedCooperatorAgent agent(policy, i, "cond-" + std::to_string(i));
    const auto ep = run_episode(agent, partner, layout, e % 2, s);
    g.returns[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)][static_cast<std::size_t>(e)] = ep.score;
  });
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j) g.mean(i, j) = mean(g.returns[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
  return g;
}

inline EvalReport grid_report(const GridResult& g, const std::string& layout, std::uint64_t seed) {
  EvalReport r;
  r.experiment = "grid";
  r.agent = "talents";
  r.seed = seed;
  for (int i = 0; i < g.K; ++i)
    for (int j = 0; j < g.K; ++j) {
      const auto& v = g.returns[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      for (std::size_t e = 0; e < v.size(); ++e) {
        EvalEpisode ep;
        ep.agent = "cond-" + std::to_string(i);
        ep.partner = "gen-c" + std::to_string(j);
        ep.layout = layout;
        ep.episode = static_cast<int>(e);
        ep.score = static_cast<int>(v[e]);
        r.episodes.push_back(std::move(ep));
      }
    }
  std::vector<std::vector<double>> m(static_cast<std::size_t>(g.K));
  for (int i = 0; i < g.K; ++i)
    for (int j = 0; j < g.K; ++j) m[static_cast<std::size_t>(i)].push_back(g.mean(i, j));
  r.meta = {{"layout", layout}, {"K", g.K}, {"matrix", m}};
  r.config_hash = hex64(hash_string(r.meta.dump() + std::to_string(seed)));
  return r;
}

}  // namespace talents::eval
