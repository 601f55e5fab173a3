#pragma once

#include <cmath>
#include <deque>
#include <string>
#include <vector>

#include "talents/core/error.hpp"

namespace talents::adaptation {

inline constexpr double kDefaultEta = 0.5;
inline constexpr double kDefaultAlpha = 0.05;

/// Weights over strategy clusters (experts) plus the update parameters.
struct BeliefState {
  std::vector<double> w;
  double eta = kDefaultEta;
  double alpha = kDefaultAlpha;  // 0 only for the static (Hedge) ablation
  std::deque<std::vector<double>> history;  // recent loss vectors, newest last
  std::size_t history_limit = 0;            // 0 disables the ring buffer

  int size() const { return static_cast<int>(w.size()); }
};

/// Uniform weights 1/K. alpha must lie strictly inside (0, 1).
inline BeliefState init_belief(int K, double eta = kDefaultEta, double alpha = kDefaultAlpha) {
  require(K >= 1, "init_belief: K must be >= 1");
  require(eta > 0.0 && std::isfinite(eta), "init_belief: eta must be > 0");
  require(alpha > 0.0 && alpha < 1.0, "init_belief: alpha must lie in (0, 1)");
  BeliefState b;
  b.w.assign(static_cast<std::size_t>(K), 1.0 / K);
  b.eta = eta;
  b.alpha = alpha;
  return b;
}

/// Belief for the static ablation: identical except no sharing.
inline BeliefState init_static_belief(int K, double eta = kDefaultEta) {
  BeliefState b = init_belief(K, eta, 0.5);
  b.alpha = 0.0;
  return b;
}

namespace detail {

inline BeliefState share_update(const BeliefState& b, const std::vector<double>& losses, double alpha) {
  require(losses.size() == b.w.size(), "belief update: one loss per expert");
  for (double l : losses) require(std::isfinite(l), "belief update: losses must be finite");
  const std::size_t K = b.w.size();
  // Subtracting the smallest loss leaves the normalised result unchanged and
  // keeps the exponentials in range.
  double lmin = losses[0];
  for (double l : losses) lmin = std::min(lmin, l);
  std::vector<double> v(K);
  double total = 0.0;
  for (std::size_t c = 0; c < K; ++c) {
    v[c] = b.w[c] * std::exp(-b.eta * (losses[c] - lmin));
    total += v[c];
  }
  require(total > 0.0 && std::isfinite(total), "belief update: weight mass vanished");
  BeliefState out = b;
  for (std::size_t c = 0; c < K; ++c) out.w[c] = (1.0 - alpha) * (v[c] / total) + alpha / static_cast<double>(K);
  if (out.history_limit > 0) {
    out.history.push_back(losses);
    while (out.history.size() > out.history_limit) out.history.pop_front();
  }
  return out;
}

}  // namespace detail

/// Exponential weights, normalise, then mix alpha of the mass uniformly.
inline BeliefState fixed_share_update(const BeliefState& b, const std::vector<double>& losses) {
  return detail::share_update(b, losses, b.alpha);
}

/// Exponential weights without sharing (fixed-share with alpha = 0).
inline BeliefState hedge_update(const BeliefState& b, const std::vector<double>& losses) {
  return detail::share_update(b, losses, 0.0);
}

/// argmax of the weights, lowest id on ties.
inline int leading_expert(const BeliefState& b) {
  require(!b.w.empty(), "leading_expert: empty belief");
  int best = 0;
  for (int c = 1; c < b.size(); ++c)
    if (b.w[static_cast<std::size_t>(c)] > b.w[static_cast<std::size_t>(best)]) best = c;
  return best;
}

/// Mixture loss sum_c w_c l_c of one round.
inline double mixture_loss(const BeliefState& b, const std::vector<double>& losses) {
  double s = 0.0;
  for (std::size_t c = 0; c < b.w.size(); ++c) s += b.w[c] * losses[c];
  return s;
}

/// Binary entropy in nats.
inline double binary_entropy(double a) {
  if (a <= 0.0 || a >= 1.0) return 0.0;
  return -a * std::log(a) - (1.0 - a) * std::log(1.0 - a);
}

/// Upper bound on fixed-share mixture loss minus the loss of the best
/// sequence of experts with at most m switches, for losses in [0, 1].
inline double tracking_regret_bound(int K, int T, int m, double eta, double alpha) {
  return eta * T / 8.0 +
         ((m + 1) * std::log(static_cast<double>(K)) + m * std::log(1.0 / alpha) + (T - 1) * binary_entropy(alpha)) / eta;
}

/// Loss of the best expert sequence with at most m switches (dynamic
/// programming over time, switches used and current expert).
inline double best_partition_loss(const std::vector<std::vector<double>>& stream, int m) {
  if (stream.empty()) return 0.0;
  const std::size_t K = stream[0].size();
  const std::size_t M = static_cast<std::size_t>(m) + 1;
  // cost[s][c]: best loss so far ending in expert c having used s switches.
  std::vector<std::vector<double>> cost(M, std::vector<double>(K, INFINITY));
  for (std::size_t c = 0; c < K; ++c) cost[0][c] = stream[0][c];
  for (std::size_t t = 1; t < stream.size(); ++t) {
    std::vector<std::vector<double>> next(M, std::vector<double>(K, INFINITY));
    for (std::size_t s = 0; s < M; ++s) {
      double best_prev = INFINITY;
      if (s > 0)
        for (std::size_t c = 0; c < K; ++c) best_prev = std::min(best_prev, cost[s - 1][c]);
      for (std::size_t c = 0; c < K; ++c) next[s][c] = std::min(cost[s][c], best_prev) + stream[t][c];
    }
    cost = std::move(next);
  }
  double best = INFINITY;
  for (const auto& row : cost)
    for (double v : row) best = std::min(best, v);
  return best;
}

}  // namespace talents::adaptation
