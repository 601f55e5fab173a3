#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "talents/cooperator/ppo.hpp"
#include "talents/partners/dataset.hpp"
#include "talents/partners/population.hpp"
#include "talents/strategy/cluster.hpp"
#include "talents/strategy/vae.hpp"

namespace talents::eval {

namespace fs = std::filesystem;
using json = nlohmann::json;
using cooperator::CooperatorPolicy;
using cooperator::DecoderPtr;
using strategy::StrategyCluster;

/// Cluster input: one posterior-mean embedding per recorded seat stream,
/// skipping filler seats.
struct StrategyPoints {
  strategy::Points points;
  std::vector<std::string> policies;  // source policy id per point
};

inline StrategyPoints strategy_points(const strategy::VaeModel<float>& m, const strategy::SequenceData& d,
                                      const std::set<std::string>& skip) {
  StrategyPoints out;
  for (int s = 0; s < static_cast<int>(d.streams.size()); ++s) {
    const auto& st = d.streams[static_cast<std::size_t>(s)];
    if (skip.contains(st.policy)) continue;
    out.points.push_back(strategy::stream_embedding(m, d, s));
    out.policies.push_back(st.policy);
  }
  return out;
}

inline std::vector<int> k_range_list(int lo, int hi) {
  std::vector<int> out;
  for (int k = lo; k <= hi; ++k) out.push_back(k);
  return out;
}

/// Everything the experiments need for one layout: population, frozen
/// decoder, clusters, conditioned cooperator and unconditioned best response.
struct PipelineConfig {
  std::string layout = "open";
  int population = 12;
  std::uint64_t population_seed = 1;
  int train_members = 9;  // members [0, train_members) are seen in training; the rest are held out
  int episodes = 8;       // reference-filler episodes per training member
  std::uint64_t seed = 1;
  strategy::VaeConfig vae = [] {
    strategy::VaeConfig c;
    c.epochs = 20;
    c.obs_dropout = 0.5;
    c.token_dropout = 0.3;
    c.seed = 3;
    return c;
  }();
  int k_min = 2, k_max = 6;
  cooperator::TrainConfig coop;

  json to_json() const {
    return {{"layout", layout},       {"population", population}, {"population_seed", population_seed},
            {"train_members", train_members}, {"episodes", episodes}, {"seed", seed},
            {"vae", vae.to_json()},   {"k_min", k_min},           {"k_max", k_max},
            {"coop", coop.to_json()}};
  }
  std::uint64_t hash() const { return hash_string(to_json().dump()); }
};

struct Pipeline {
  PipelineConfig cfg;
  std::vector<partners::PopulationMember> population;
  DecoderPtr dec;
  std::vector<StrategyCluster> clusters;
  std::vector<double> silhouettes;  // mean silhouette per k in [k_min, k_max]
  int best_k = 0;
  std::vector<int> emphasis_cluster;  // majority cluster of each emphasis's training members, -1 when none
  std::shared_ptr<const CooperatorPolicy> talents, best_response;

  std::vector<partners::ScriptedPolicy> holdout() const {
    std::vector<partners::ScriptedPolicy> out;
    for (int i = cfg.train_members; i < cfg.population; ++i) out.push_back(population[static_cast<std::size_t>(i)].policy);
    return out;
  }
  /// Planted cluster of a population member, via its emphasis.
  int planted_cluster(int member) const {
    return emphasis_cluster[static_cast<std::size_t>(population[static_cast<std::size_t>(member)].emphasis)];
  }
};

using Log = std::function<void(const std::string&)>;

/// Majority cluster per emphasis over the training members' points.
inline std::vector<int> emphasis_majority(const std::vector<partners::PopulationMember>& pop, const StrategyPoints& pts,
                                          const std::vector<int>& assignments, int K) {
  std::map<std::string, int> emph;
  for (const auto& m : pop) emph[m.policy.id()] = static_cast<int>(m.emphasis);
  std::vector<std::vector<int>> counts(partners::kNumEmphases, std::vector<int>(static_cast<std::size_t>(K), 0));
  for (std::size_t i = 0; i < pts.policies.size(); ++i) {
    const auto it = emph.find(pts.policies[i]);
    if (it != emph.end()) ++counts[static_cast<std::size_t>(it->second)][static_cast<std::size_t>(assignments[i])];
  }
  std::vector<int> out(partners::kNumEmphases, -1);
  for (int e = 0; e < partners::kNumEmphases; ++e) {
    const auto& c = counts[static_cast<std::size_t>(e)];
    int best = -1, n = 0;
    for (int k = 0; k < K; ++k)
      if (c[static_cast<std::size_t>(k)] > n) n = c[static_cast<std::size_t>(best = k)];
    out[static_cast<std::size_t>(e)] = best;
  }
  return out;
}

/// Builds (or reloads from `cache_dir`, keyed by the config hash) the whole
/// per-layout pipeline: reference-filler data, VAE, clusters, cooperators.
inline Pipeline build_pipeline(const PipelineConfig& cfg, const std::string& cache_dir, const Log& log = {}) {
  auto say = [&](const std::string& s) {
    if (log) log(s);
  };
  Pipeline p;
  p.cfg = cfg;
  p.population = partners::make_population(cfg.population, cfg.population_seed);
  if (cfg.train_members < 2 || cfg.train_members > cfg.population) throw ConfigError("pipeline: bad train member count");
  const fs::path dir = fs::path(cache_dir) / (cfg.layout + "-" + hex64(cfg.hash()));
  fs::create_directories(dir);
  const fs::path meta_path = dir / "pipeline.json";
  if (fs::exists(meta_path)) {
    std::ifstream f(meta_path);
    const json meta = json::parse(f);
    p.dec = std::make_shared<const strategy::VaeModel<float>>(strategy::load_vae<float>((dir / "vae.ckpt").string()));
    p.clusters = strategy::load_clusters((dir / "clusters.json").string());
    p.best_k = meta.at("best_k").get<int>();
    p.silhouettes = meta.at("silhouettes").get<std::vector<double>>();
    p.emphasis_cluster = meta.at("emphasis_cluster").get<std::vector<int>>();
    p.talents = std::make_shared<const CooperatorPolicy>(cooperator::load_policy((dir / "talents.policy").string()));
    p.best_response = std::make_shared<const CooperatorPolicy>(cooperator::load_policy((dir / "br.policy").string()));
    say("loaded cached pipeline " + dir.string());
    return p;
  }

  std::vector<partners::ScriptedPolicy> members;
  for (int i = 0; i < cfg.train_members; ++i) members.push_back(p.population[static_cast<std::size_t>(i)].policy);
  partners::CollectOptions co;
  co.out_dir = (dir / "data").string();
  co.reference = true;
  co.vary_checkpoints = false;
  const auto ds = partners::collect_rollouts(members, {cfg.layout}, cfg.episodes, cfg.seed, co);
  std::vector<kitchen::Trajectory> trajs;
  for (const auto& e : ds.entries) trajs.push_back(ds.load(e));
  const std::set<std::string> skip = {partners::kReferenceId};
  const auto data = strategy::build_sequence_data(trajs, cfg.vae.horizon, skip);
  say("collected " + std::to_string(trajs.size()) + " episodes, " + std::to_string(data.windows.size()) + " windows");

  auto vr = strategy::train_vae<float>(data, cfg.vae, [&](int epoch, const strategy::EpochStats& s) {
    say("vae epoch " + std::to_string(epoch) + " loss " + std::to_string(s.loss) + " kl " + std::to_string(s.kl));
  });
  strategy::save_vae((dir / "vae.ckpt").string(), vr.model);
  p.dec = std::make_shared<const strategy::VaeModel<float>>(std::move(vr.model));

  const auto pts = strategy_points(*p.dec, data, skip);
  const auto sk = strategy::select_k(pts.points, k_range_list(cfg.k_min, cfg.k_max), cfg.seed);
  p.best_k = sk.best_k;
  p.clusters = sk.clusters;
  p.silhouettes = sk.mean_silhouette;
  p.emphasis_cluster = emphasis_majority(p.population, pts, sk.assignments, sk.best_k);
  strategy::save_clusters((dir / "clusters.json").string(), p.clusters);
  say("selected k = " + std::to_string(p.best_k));

  cooperator::TrainConfig tc = cfg.coop;
  tc.layouts = {cfg.layout};
  auto progress = [&](const std::string& name) {
    return [&, name](int u, const cooperator::TrainResult& r) {
      if (u % 25 != 24) return;
      double m = 0.0;
      const std::size_t n = std::min<std::size_t>(20, r.episode_scores.size());
      for (std::size_t i = r.episode_scores.size() - n; i < r.episode_scores.size(); ++i) m += r.episode_scores[i];
      say(name + " steps " + std::to_string(r.env_steps) + " recent score " + std::to_string(m / static_cast<double>(n)));
    };
  };
  auto tal = cooperator::train_cooperator(p.clusters, p.dec, tc, progress("talents"));
  cooperator::save_trained_policy((dir / "talents.policy").string(), tal.policy, tc);
  tc.policy.conditioned = false;
  auto br = cooperator::train_cooperator(p.clusters, p.dec, tc, progress("best-response"));
  cooperator::save_trained_policy((dir / "br.policy").string(), br.policy, tc);
  p.talents = std::make_shared<const CooperatorPolicy>(std::move(tal.policy));
  p.best_response = std::make_shared<const CooperatorPolicy>(std::move(br.policy));

  json meta = {{"config", cfg.to_json()},
               {"best_k", p.best_k},
               {"silhouettes", p.silhouettes},
               {"emphasis_cluster", p.emphasis_cluster}};
  std::ofstream(meta_path) << meta.dump(2) << '\n';
  return p;
}

}  // namespace talents::eval
