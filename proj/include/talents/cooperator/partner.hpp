#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "talents/cooperator/features.hpp"
#include "talents/partners/agent.hpp"
#include "talents/strategy/cluster.hpp"
#include "talents/strategy/vae.hpp"

namespace talents::cooperator {

using Decoder = strategy::VaeModel<float>;
using DecoderPtr = std::shared_ptr<const Decoder>;

inline constexpr double kPriorityTemperature = 20.0;

/// Draws z ~ N(mean, diag(variance)).
inline Eigen::VectorXd sample_latent(const strategy::StrategyCluster& c, Rng& rng) {
  Eigen::VectorXd z(c.mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = c.mean(i) + std::sqrt(c.variance(i)) * rng.normal();
  return z;
}

/// First-step macro categorical p(. | z, o) for a single observation.
inline Eigen::VectorXd macro_probs(const Decoder& dec, const Eigen::VectorXd& z, const kitchen::ObservationVec& obs) {
  nn::Mat<float> zf = z.cast<float>();
  nn::Mat<float> of(static_cast<Eigen::Index>(obs.size()), 1);
  for (std::size_t i = 0; i < obs.size(); ++i) of(static_cast<Eigen::Index>(i), 0) = static_cast<float>(obs[i]);
  return strategy::first_step_probs(dec, zf, of).col(0).cast<double>();
}

/// Partner generated from one strategy cluster: whenever its macro executor
/// is free it decodes p(. | z_c, o_t), takes the most likely macro that is
/// currently feasible, and executes it with the scripted planner.
class GenerativePartner final : public partners::Agent {
 public:
  GenerativePartner(int cluster, Eigen::VectorXd z, DecoderPtr dec)
      : cluster_(cluster), z_(std::move(z)), dec_(std::move(dec)) {}

  std::string id() const override { return "gen-c" + std::to_string(cluster_); }
  int cluster() const { return cluster_; }
  const Eigen::VectorXd& latent() const { return z_; }
  const std::vector<MacroAction>& chosen() const { return chosen_; }

  void reset(const GameState&, int, std::uint64_t seed) override {
    exec_ = {};
    seed_ = seed;
    chosen_.clear();
  }

  PrimitiveAction act(const GameState& s, int seat) override {
    if (!exec_.busy()) {
      const Eigen::VectorXd p = macro_probs(*dec_, z_, kitchen::observe(s, seat));
      const auto ok = partners::feasible_macros(s, seat);
      int best = static_cast<int>(MacroAction::idle);
      double bp = -1.0;
      for (int m = 0; m < kNumMacroActions; ++m)
        if (ok[static_cast<std::size_t>(m)] && p(m) > bp) {
          bp = p(m);
          best = m;
        }
      exec_.start(static_cast<MacroAction>(best));
      chosen_.push_back(static_cast<MacroAction>(best));
    }
    return exec_.act(s, seat, derive_seed(seed_, static_cast<std::uint64_t>(s.tick)));
  }

  void observe(const kitchen::StepResult& r, int seat) override { exec_.observe(r.events, seat); }

 private:
  int cluster_;
  Eigen::VectorXd z_;
  DecoderPtr dec_;
  partners::MacroExecutor exec_;
  std::uint64_t seed_ = 0;
  std::vector<MacroAction> chosen_;
};

/// Draws a cluster from `priorities`, then z from that cluster's Gaussian.
inline GenerativePartner sample_partner(const std::vector<strategy::StrategyCluster>& clusters,
                                        const std::vector<double>& priorities, DecoderPtr dec, std::uint64_t seed) {
  require(!clusters.empty(), "sample_partner: no clusters");
  require(priorities.size() == clusters.size(), "sample_partner: one priority per cluster");
  Rng rng(seed);
  double total = 0.0;
  for (double p : priorities) total += p;
  double u = rng.uniform() * total;
  std::size_t c = 0;
  for (; c + 1 < clusters.size(); ++c) {
    if (priorities[c] > 0.0 && u < priorities[c]) break;
    u -= priorities[c];
  }
  while (priorities[c] <= 0.0 && c > 0) --c;
  return GenerativePartner(static_cast<int>(c), sample_latent(clusters[c], rng), std::move(dec));
}

/// p_c proportional to exp(-return_c / T): weaker pairings are sampled more.
inline std::vector<double> update_priorities(const std::vector<double>& returns, double temperature = kPriorityTemperature) {
  require(!returns.empty(), "update_priorities: no returns");
  require(temperature > 0.0, "update_priorities: temperature must be > 0");
  double lo = returns[0];
  for (double r : returns) lo = std::min(lo, r);
  std::vector<double> p(returns.size());
  double total = 0.0;
  for (std::size_t c = 0; c < returns.size(); ++c) {
    p[c] = std::exp(-(returns[c] - lo) / temperature);
    total += p[c];
  }
  for (auto& v : p) v /= total;
  return p;
}

}  // namespace talents::cooperator
