#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"
#include "talents/cooperator/features.hpp"
#include "talents/kitchen/observe.hpp"
#include "talents/strategy/checkpoint.hpp"
#include "talents/strategy/cluster.hpp"
#include "talents/strategy/nn.hpp"

namespace talents::cooperator {

using json = nlohmann::json;
using MatD = nn::Mat<double>;
using VecD = nn::Vec<double>;

/// What the cooperator sees at one tick: its own observation plus the macro
/// route hints for its seat.
struct PolicyInput {
  kitchen::ObservationVec obs;
  MacroHints hints;
};

inline PolicyInput make_input(const GameState& s, int seat) { return {kitchen::observe(s, seat), macro_hints(s, seat)}; }

struct PolicyConfig {
  int hidden = 64;
  bool conditioned = true;  // false: unconditioned best-response baseline (no bias table)
};

/// Actor-critic with a per-cluster action-bias table.
///
/// Actor: MLP over [o ; hint features ; mu_c] producing 6 direct logits and
/// 10 macro gates; logit(a) = direct(a) + sum_m gate(m) [hint step of m = a].
/// The biased policy adds row b(c) to these logits.
/// Critic: MLP over [o ; hint features ; onehot(c)] -> scalar.
class CooperatorPolicy {
 public:
  int obs_dim = 0;
  int K = 0;           // number of clusters (bias rows); 0 when unconditioned
  int latent_dim = 0;  // conditioning width; 0 when unconditioned
  PolicyConfig cfg;
  MatD cluster_means;  // latent_dim x K
  nn::Dense<double> a1, a2, a_out, v1, v2, v_out;
  nn::Param<double> bias;  // K x 6

  static constexpr int kHeadSize = kNumPrimitiveActions + kNumMacroActions;
  static constexpr double kGateInit = 2.0;

  void init(int obs, const std::vector<strategy::StrategyCluster>& clusters, const PolicyConfig& c, std::uint64_t seed) {
    cfg = c;
    obs_dim = obs;
    K = cfg.conditioned ? static_cast<int>(clusters.size()) : 0;
    if (cfg.conditioned && K == 0) throw ConfigError("conditioned cooperator needs at least one cluster");
    latent_dim = K > 0 ? static_cast<int>(clusters[0].mean.size()) : 0;
    cluster_means = MatD::Zero(latent_dim, K);
    for (int k = 0; k < K; ++k) cluster_means.col(k) = clusters[static_cast<std::size_t>(k)].mean;
    Rng rng(seed);
    a1.init("actor.l1", actor_in(), cfg.hidden, rng);
    a2.init("actor.l2", cfg.hidden, cfg.hidden, rng);
    a_out.init("actor.out", cfg.hidden, kHeadSize, rng);
    a_out.W.value *= 0.1;
    a_out.b.value.setZero();
    // Start out following macro routes rather than wandering.
    a_out.b.value.bottomRows(kNumMacroActions).setConstant(kGateInit);
    v1.init("critic.l1", critic_in(), cfg.hidden, rng);
    v2.init("critic.l2", cfg.hidden, cfg.hidden, rng);
    v_out.init("critic.out", cfg.hidden, 1, rng);
    bias.name = "bias";
    bias.resize(K, kNumPrimitiveActions);
  }

  int actor_in() const { return obs_dim + kHintFeatures + latent_dim; }
  int critic_in() const { return obs_dim + kHintFeatures + K; }

  nn::ParamList<double> params() {
    nn::ParamList<double> out;
    for (auto* l : {&a1, &a2, &a_out, &v1, &v2, &v_out})
      for (auto* p : l->params()) out.push_back(p);
    out.push_back(&bias);
    return out;
  }

  void check_cluster(int c) const {
    if (K > 0) require(c >= 0 && c < K, "cooperator: cluster id " + std::to_string(c) + " outside [0, K)");
  }

  /// Writes the actor input column for (input, c).
  void actor_column(const PolicyInput& in, int c, double* out) const {
    require(static_cast<int>(in.obs.size()) == obs_dim, "cooperator: observation length mismatch");
    std::copy(in.obs.begin(), in.obs.end(), out);
    hint_features(in.hints, out + obs_dim);
    if (latent_dim > 0) {
      check_cluster(c);
      for (int i = 0; i < latent_dim; ++i) out[obs_dim + kHintFeatures + i] = cluster_means(i, c);
    }
  }
  void critic_column(const PolicyInput& in, int c, double* out) const {
    std::copy(in.obs.begin(), in.obs.end(), out);
    hint_features(in.hints, out + obs_dim);
    for (int k = 0; k < K; ++k) out[obs_dim + kHintFeatures + k] = k == c ? 1.0 : 0.0;
  }

  struct ActorCache {
    MatD X, H1, H2, Y;
  };

  /// Unbiased logits (6 x B) for a batch of actor inputs and hint steps.
  MatD actor_logits(const MatD& X, const Eigen::MatrixXi& steps, ActorCache* cache = nullptr) const {
    MatD H1 = a1.forward(X).array().tanh().matrix();
    MatD H2 = a2.forward(H1).array().tanh().matrix();
    MatD Y = a_out.forward(H2);
    MatD L = Y.topRows(kNumPrimitiveActions);
    for (Eigen::Index j = 0; j < X.cols(); ++j)
      for (int m = 0; m < kNumMacroActions; ++m) {
        const int a = steps(m, j);
        if (a >= 0) L(a, j) += Y(kNumPrimitiveActions + m, j);
      }
    if (cache) *cache = {X, std::move(H1), std::move(H2), std::move(Y)};
    return L;
  }

  /// Accumulates actor gradients from dL/dlogits.
  void actor_backward(const ActorCache& c, const Eigen::MatrixXi& steps, const MatD& dL) {
    MatD dY(kHeadSize, dL.cols());
    dY.topRows(kNumPrimitiveActions) = dL;
    for (Eigen::Index j = 0; j < dL.cols(); ++j)
      for (int m = 0; m < kNumMacroActions; ++m) {
        const int a = steps(m, j);
        dY(kNumPrimitiveActions + m, j) = a >= 0 ? dL(a, j) : 0.0;
      }
    MatD dH2 = a_out.backward(c.H2, dY);
    MatD dA2 = (dH2.array() * (1.0 - c.H2.array().square())).matrix();
    MatD dH1 = a2.backward(c.H1, dA2);
    MatD dA1 = (dH1.array() * (1.0 - c.H1.array().square())).matrix();
    a1.backward(c.X, dA1);
  }

  struct CriticCache {
    MatD X, H1, H2;
  };

  VecD value(const MatD& X, CriticCache* cache = nullptr) const {
    MatD H1 = v1.forward(X).array().tanh().matrix();
    MatD H2 = v2.forward(H1).array().tanh().matrix();
    VecD v = v_out.forward(H2).row(0).transpose();
    if (cache) *cache = {X, std::move(H1), std::move(H2)};
    return v;
  }

  void critic_backward(const CriticCache& c, const VecD& dv) {
    MatD dH2 = v_out.backward(c.H2, dv.transpose());
    MatD dA2 = (dH2.array() * (1.0 - c.H2.array().square())).matrix();
    MatD dH1 = v2.backward(c.H1, dA2);
    MatD dA1 = (dH1.array() * (1.0 - c.H1.array().square())).matrix();
    v1.backward(c.X, dA1);
  }

  /// Bias row b(c); zero for the unconditioned policy.
  VecD bias_row(int c) const {
    if (K == 0) return VecD::Zero(kNumPrimitiveActions);
    check_cluster(c);
    return bias.value.row(c).transpose();
  }

  static Eigen::MatrixXi step_column(const MacroHints& h) {
    Eigen::MatrixXi s(kNumMacroActions, 1);
    for (int m = 0; m < kNumMacroActions; ++m) s(m, 0) = h.step[static_cast<std::size_t>(m)];
    return s;
  }

  /// Logits of the unbiased actor for one input under conditioning c.
  VecD logits(const PolicyInput& in, int c) const {
    MatD X(actor_in(), 1);
    actor_column(in, c, X.data());
    return actor_logits(X, step_column(in.hints)).col(0);
  }
};

/// Actor logits plus b(c), with no renormalisation.
inline VecD biased_logits(const CooperatorPolicy& pi, const PolicyInput& in, int c) {
  return pi.logits(in, c) + pi.bias_row(c);
}

inline VecD softmax(const VecD& logits) { return nn::softmax_cols<double>(logits); }

/// Samples an index from a categorical given a uniform draw in [0, 1).
inline int sample_categorical(const VecD& p, double u) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    acc += p(i);
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(p.size()) - 1;
}

inline int argmax(const VecD& v) {
  Eigen::Index i;
  v.maxCoeff(&i);
  return static_cast<int>(i);
}

// Policy checkpoint format "talents-policy" version 1.
inline constexpr int kPolicyFormatVersion = 1;

inline void save_policy(const std::string& path, CooperatorPolicy& pi, json extra = json::object()) {
  json manifest = std::move(extra);
  manifest["format"] = "talents-policy";
  manifest["version"] = kPolicyFormatVersion;
  manifest["K"] = pi.K;
  manifest["action_count"] = kNumPrimitiveActions;
  manifest["obs_dim"] = pi.obs_dim;
  manifest["latent_dim"] = pi.latent_dim;
  manifest["hidden"] = pi.cfg.hidden;
  manifest["conditioned"] = pi.cfg.conditioned;
  std::vector<std::vector<double>> means;
  for (int k = 0; k < pi.K; ++k)
    means.emplace_back(pi.cluster_means.col(k).data(), pi.cluster_means.col(k).data() + pi.latent_dim);
  manifest["cluster_means"] = means;
  nn::save_checkpoint(path, manifest, pi.params());
}

inline CooperatorPolicy load_policy(const std::string& path, json* manifest_out = nullptr) {
  const json m = nn::read_manifest(path, "talents-policy", kPolicyFormatVersion);
  if (m.value("action_count", 0) != kNumPrimitiveActions) throw FormatError(path + ": action count differs");
  CooperatorPolicy pi;
  PolicyConfig cfg;
  cfg.hidden = m.at("hidden").get<int>();
  cfg.conditioned = m.at("conditioned").get<bool>();
  std::vector<strategy::StrategyCluster> cs;
  for (const auto& mean : m.at("cluster_means")) {
    strategy::StrategyCluster c;
    const auto v = mean.get<std::vector<double>>();
    c.mean = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    cs.push_back(c);
  }
  if (static_cast<int>(cs.size()) != m.at("K").get<int>()) throw FormatError(path + ": K does not match the stored cluster means");
  pi.init(m.at("obs_dim").get<int>(), cs, cfg, 0);
  nn::load_tensors(path, m, pi.params());
  if (manifest_out) *manifest_out = m;
  return pi;
}

}  // namespace talents::cooperator
