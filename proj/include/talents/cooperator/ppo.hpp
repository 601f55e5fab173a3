#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "talents/cooperator/partner.hpp"
#include "talents/cooperator/policy.hpp"
#include "talents/kitchen/env.hpp"

namespace talents::cooperator {

struct TrainConfig {
  std::vector<std::string> layouts = {"open"};
  int total_steps = 200000;
  int episode_length = 0;  // <= 0: layout default
  int episodes_per_update = 4;
  int epochs = 4;
  int minibatch = 400;
  double lr = 5e-4;
  double clip = 0.2;
  double gamma = 0.99;
  double lambda = 0.95;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double max_grad_norm = 1.0;
  double shaping = 1.0;  // weight of the potential-based shaping term
  double priority_temperature = kPriorityTemperature;
  PolicyConfig policy;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string dump_dir;  // where a failing batch is written; empty: none

  void validate() const {
    if (layouts.empty()) throw ConfigError("train config: no layouts");
    if (total_steps < 1 || episodes_per_update < 1 || epochs < 1 || minibatch < 1)
      throw ConfigError("train config: step, episode, epoch and minibatch counts must be >= 1");
    if (!(lr > 0.0) || !(clip > 0.0) || !(gamma > 0.0 && gamma <= 1.0) || !(lambda >= 0.0 && lambda <= 1.0))
      throw ConfigError("train config: invalid optimisation constants");
  }

  json to_json() const {
    return {{"layouts", layouts},
            {"total_steps", total_steps},
            {"episode_length", episode_length},
            {"episodes_per_update", episodes_per_update},
            {"epochs", epochs},
            {"minibatch", minibatch},
            {"lr", lr},
            {"clip", clip},
            {"gamma", gamma},
            {"lambda", lambda},
            {"entropy_coef", entropy_coef},
            {"value_coef", value_coef},
            {"max_grad_norm", max_grad_norm},
            {"shaping", shaping},
            {"priority_temperature", priority_temperature},
            {"hidden", policy.hidden},
            {"conditioned", policy.conditioned},
            {"seed", seed}};
  }
  std::uint64_t hash() const { return hash_string(to_json().dump()); }
};

/// One cooperator decision recorded during a rollout.
struct Transition {
  std::vector<double> actor_x, critic_x;
  std::array<int, kNumMacroActions> steps{};
  int cluster = 0;
  int action = 0;
  double logp = 0.0;
  double value = 0.0;
  double reward = 0.0;  // team reward plus shaping
  double advantage = 0.0;
  double ret = 0.0;
};

struct EpisodeRecord {
  int cluster = 0;
  std::string layout;
  int seat = 0;
  int score = 0;  // team score, unshaped
  std::vector<Transition> steps;
};

struct TrainResult {
  CooperatorPolicy policy;
  std::vector<int> episode_scores;
  std::vector<int> episode_clusters;
  std::vector<std::vector<double>> priorities;  // after every update
  long env_steps = 0;
};

/// Plays one training episode: the cooperator conditioned on `cluster`
/// against `partner`, sampling from the biased policy.
inline EpisodeRecord rollout_episode(const CooperatorPolicy& pi, partners::Agent& partner, int cluster,
                                     const kitchen::LayoutPtr& layout, int episode_length, int seat,
                                     std::uint64_t seed, double gamma, double shaping) {
  EpisodeRecord ep;
  ep.cluster = cluster;
  ep.layout = layout->name;
  ep.seat = seat;
  const int pseat = 1 - seat;
  GameState s = kitchen::initial_state(layout, seed, episode_length);
  partner.reset(s, pseat, derive_seed(seed, 2));
  Rng rng(derive_seed(seed, 1));
  double phi = kitchen_potential(s);
  while (!s.terminal()) {
    const PolicyInput in = make_input(s, seat);
    Transition t;
    t.cluster = cluster;
    t.actor_x.resize(static_cast<std::size_t>(pi.actor_in()));
    t.critic_x.resize(static_cast<std::size_t>(pi.critic_in()));
    pi.actor_column(in, cluster, t.actor_x.data());
    pi.critic_column(in, cluster, t.critic_x.data());
    t.steps = in.hints.step;
    const VecD logits = pi.actor_logits(Eigen::Map<const MatD>(t.actor_x.data(), pi.actor_in(), 1),
                                        CooperatorPolicy::step_column(in.hints))
                            .col(0) +
                        pi.bias_row(cluster);
    const VecD p = softmax(logits);
    t.action = sample_categorical(p, rng.uniform());
    t.logp = std::log(p(t.action));
    t.value = pi.value(Eigen::Map<const MatD>(t.critic_x.data(), pi.critic_in(), 1))(0);
    kitchen::JointAction joint;
    joint[static_cast<std::size_t>(seat)] = static_cast<PrimitiveAction>(t.action);
    joint[static_cast<std::size_t>(pseat)] = partner.act(s, pseat);
    kitchen::StepResult r = kitchen::step(s, joint);
    partner.observe(r, pseat);
    const double phi2 = r.state.terminal() ? 0.0 : kitchen_potential(r.state);
    t.reward = r.reward[static_cast<std::size_t>(seat)] + shaping * (gamma * phi2 - phi);
    phi = phi2;
    s = std::move(r.state);
    ep.steps.push_back(std::move(t));
  }
  ep.score = s.score;
  return ep;
}

/// Generalised advantage estimation over one finished episode.
inline void compute_gae(std::vector<Transition>& steps, double gamma, double lambda) {
  double next_value = 0.0, gae = 0.0;
  for (std::size_t i = steps.size(); i-- > 0;) {
    auto& t = steps[i];
    const double delta = t.reward + gamma * next_value - t.value;
    gae = delta + gamma * lambda * gae;
    t.advantage = gae;
    t.ret = gae + t.value;
    next_value = t.value;
  }
}

struct PpoLoss {
  double policy = 0.0, value = 0.0, entropy = 0.0, total = 0.0;
};

/// Clipped-surrogate loss and gradients for one minibatch (accumulated into
/// the policy parameters).
inline PpoLoss ppo_minibatch(CooperatorPolicy& pi, const std::vector<const Transition*>& mb, const TrainConfig& cfg) {
  const auto B = static_cast<Eigen::Index>(mb.size());
  MatD Xa(pi.actor_in(), B), Xc(pi.critic_in(), B);
  Eigen::MatrixXi steps(kNumMacroActions, B);
  for (Eigen::Index j = 0; j < B; ++j) {
    const Transition& t = *mb[static_cast<std::size_t>(j)];
    Xa.col(j) = Eigen::Map<const VecD>(t.actor_x.data(), pi.actor_in());
    Xc.col(j) = Eigen::Map<const VecD>(t.critic_x.data(), pi.critic_in());
    for (int m = 0; m < kNumMacroActions; ++m) steps(m, j) = t.steps[static_cast<std::size_t>(m)];
  }
  CooperatorPolicy::ActorCache ac;
  MatD L = pi.actor_logits(Xa, steps, &ac);
  for (Eigen::Index j = 0; j < B; ++j) L.col(j) += pi.bias_row(mb[static_cast<std::size_t>(j)]->cluster);
  const MatD P = nn::softmax_cols<double>(L);
  MatD dL = MatD::Zero(L.rows(), B);
  PpoLoss loss;
  const double invB = 1.0 / static_cast<double>(B);
  for (Eigen::Index j = 0; j < B; ++j) {
    const Transition& t = *mb[static_cast<std::size_t>(j)];
    const auto p = P.col(j);
    const double logp = std::log(p(t.action));
    const double ratio = std::exp(logp - t.logp);
    const double A = t.advantage;
    const double unclipped = ratio * A;
    const double clipped = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * A;
    loss.policy -= std::min(unclipped, clipped) * invB;
    if (unclipped <= clipped) {
      // d(-ratio A)/dlogits = -A ratio (onehot - p)
      for (Eigen::Index a = 0; a < p.size(); ++a) dL(a, j) += A * ratio * p(a) * invB;
      dL(t.action, j) -= A * ratio * invB;
    }
    double H = 0.0;
    for (Eigen::Index a = 0; a < p.size(); ++a) H -= p(a) * std::log(std::max(p(a), 1e-300));
    loss.entropy += H * invB;
    for (Eigen::Index a = 0; a < p.size(); ++a)
      dL(a, j) += cfg.entropy_coef * p(a) * (std::log(std::max(p(a), 1e-300)) + H) * invB;
  }
  pi.actor_backward(ac, steps, dL);
  if (pi.K > 0)
    for (Eigen::Index j = 0; j < B; ++j) pi.bias.grad.row(mb[static_cast<std::size_t>(j)]->cluster) += dL.col(j).transpose();

  CooperatorPolicy::CriticCache cc;
  const VecD v = pi.value(Xc, &cc);
  VecD dv(B);
  for (Eigen::Index j = 0; j < B; ++j) {
    const double err = v(j) - mb[static_cast<std::size_t>(j)]->ret;
    loss.value += 0.5 * err * err * invB;
    dv(j) = cfg.value_coef * err * invB;
  }
  pi.critic_backward(cc, dv);
  loss.total = loss.policy + cfg.value_coef * loss.value - cfg.entropy_coef * loss.entropy;
  return loss;
}

/// Clipped-surrogate policy-gradient training of actor, critic and bias
/// table against freshly sampled generative partners. Deterministic given
/// cfg.seed (independent of the worker count).
inline TrainResult train_cooperator(const std::vector<strategy::StrategyCluster>& clusters, DecoderPtr dec,
                                    const TrainConfig& cfg,
                                    const std::function<void(int, const TrainResult&)>& on_update = {}) {
  cfg.validate();
  require(dec != nullptr, "train_cooperator: no decoder");
  if (clusters.empty()) throw ConfigError("train_cooperator: no clusters");
  std::vector<kitchen::LayoutPtr> layouts;
  for (const auto& name : cfg.layouts) layouts.push_back(kitchen::builtin_layout(name));

  TrainResult res;
  res.policy.init(kitchen::kObservationSize, clusters, cfg.policy, derive_seed(cfg.seed, 0xc0));
  CooperatorPolicy& pi = res.policy;
  const int K = static_cast<int>(clusters.size());
  std::vector<double> priorities(static_cast<std::size_t>(K), 1.0 / K);
  std::vector<double> ema(static_cast<std::size_t>(K), 0.0);
  std::vector<bool> seen(static_cast<std::size_t>(K), false);
  nn::Adam<double> opt({cfg.lr, 0.9, 0.999, 1e-8, cfg.max_grad_norm});
  auto params = pi.params();
  Rng rng(derive_seed(cfg.seed, 0x99));

  long episode = 0;
  int update = 0;
  while (res.env_steps < cfg.total_steps) {
    // Rollouts: every episode's randomness derives from its index only.
    const int n = cfg.episodes_per_update;
    std::vector<EpisodeRecord> eps(static_cast<std::size_t>(n));
    auto run = [&](int i) {
      const auto e = static_cast<std::uint64_t>(episode + i);
      const std::uint64_t es = derive_seed(cfg.seed, 0x100000 + e);
      GenerativePartner partner = sample_partner(clusters, priorities, dec, derive_seed(es, 7));
      const auto& layout = layouts[static_cast<std::size_t>(e % layouts.size())];
      const int seat = static_cast<int>((e / layouts.size()) % 2);
      eps[static_cast<std::size_t>(i)] = rollout_episode(pi, partner, partner.cluster(), layout, cfg.episode_length,
                                                         seat, es, cfg.gamma, cfg.shaping);
    };
    if (cfg.workers > 1) {
      std::vector<std::thread> pool;
      std::atomic<int> next{0};
      for (int w = 0; w < std::min(cfg.workers, n); ++w)
        pool.emplace_back([&] {
          for (int i; (i = next++) < n;) run(i);
        });
      for (auto& t : pool) t.join();
    } else {
      for (int i = 0; i < n; ++i) run(i);
    }
    episode += n;

    std::vector<const Transition*> batch;
    for (auto& ep : eps) {
      compute_gae(ep.steps, cfg.gamma, cfg.lambda);
      for (const auto& t : ep.steps) batch.push_back(&t);
      res.env_steps += static_cast<long>(ep.steps.size());
      res.episode_scores.push_back(ep.score);
      res.episode_clusters.push_back(ep.cluster);
      auto& m = ema[static_cast<std::size_t>(ep.cluster)];
      m = seen[static_cast<std::size_t>(ep.cluster)] ? 0.8 * m + 0.2 * ep.score : ep.score;
      seen[static_cast<std::size_t>(ep.cluster)] = true;
    }
    // Advantage normalisation over the whole batch.
    double mean = 0.0, sq = 0.0;
    for (const auto* t : batch) mean += t->advantage;
    mean /= static_cast<double>(batch.size());
    for (const auto* t : batch) sq += (t->advantage - mean) * (t->advantage - mean);
    const double sd = std::sqrt(sq / static_cast<double>(batch.size())) + 1e-8;
    for (auto& ep : eps)
      for (auto& t : ep.steps) t.advantage = (t.advantage - mean) / sd;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      for (std::size_t i = batch.size() - 1; i > 0; --i) std::swap(batch[i], batch[rng.below(i + 1)]);
      for (std::size_t off = 0, mbi = 0; off < batch.size(); off += static_cast<std::size_t>(cfg.minibatch), ++mbi) {
        const std::vector<const Transition*> mb(
            batch.begin() + static_cast<std::ptrdiff_t>(off),
            batch.begin() + static_cast<std::ptrdiff_t>(std::min(batch.size(), off + static_cast<std::size_t>(cfg.minibatch))));
        nn::zero_grad(params);
        const PpoLoss l = ppo_minibatch(pi, mb, cfg);
        bool finite = std::isfinite(l.total);
        for (auto* p : params) finite = finite && p->grad.allFinite();
        if (!finite) {
          std::ostringstream msg;
          msg << "train_cooperator: non-finite loss at update " << update << ", epoch " << epoch << ", minibatch " << mbi
              << " (policy " << l.policy << ", value " << l.value << ", entropy " << l.entropy << ")";
          if (!cfg.dump_dir.empty()) {
            const std::string path = cfg.dump_dir + "/nan_batch_u" + std::to_string(update) + ".json";
            json dump = json::array();
            for (const auto* t : mb)
              dump.push_back({{"cluster", t->cluster}, {"action", t->action}, {"logp", t->logp}, {"value", t->value},
                              {"reward", t->reward}, {"advantage", t->advantage}, {"return", t->ret},
                              {"actor_input", t->actor_x}});
            std::ofstream(path) << dump.dump() << '\n';
            msg << "; batch written to " << path;
          }
          throw TrainingError(msg.str());
        }
        opt.step(params);
      }
    }
    priorities = update_priorities(ema, cfg.priority_temperature);
    res.priorities.push_back(priorities);
    if (on_update) on_update(update, res);
    ++update;
  }
  return res;
}

inline void save_trained_policy(const std::string& path, CooperatorPolicy& pi, const TrainConfig& cfg,
                                json extra = json::object()) {
  extra["train_config"] = cfg.to_json();
  extra["config_hash"] = hex64(cfg.hash());
  save_policy(path, pi, std::move(extra));
}

}  // namespace talents::cooperator
