#pragma once

#include <optional>
#include <string>
#include <vector>

#include "talents/adaptation/belief.hpp"
#include "talents/cooperator/partner.hpp"
#include "talents/cooperator/policy.hpp"
#include "talents/kitchen/macro.hpp"

namespace talents::adaptation {

using cooperator::CooperatorPolicy;
using cooperator::DecoderPtr;
using cooperator::PolicyInput;
using kitchen::GameState;
using kitchen::MacroAction;
using kitchen::PrimitiveAction;
using strategy::StrategyCluster;

inline constexpr double kProbabilityFloor = 1e-8;

/// Per-cluster decoder predictions for one observed partner macro.
struct ExpertPrediction {
  std::vector<Eigen::VectorXd> z;
  std::vector<int> predicted;  // argmax macro per cluster
  std::vector<double> loss;    // -log p(observed | z_c, o), floored
};

/// The partner's observation at its decision point and the macro it then
/// completed.
struct PartnerEvidence {
  MacroAction macro = MacroAction::idle;
  kitchen::ObservationVec partner_obs;
};

/// Samples z_c per cluster (or uses mu_c when fixed_latent) and scores the
/// observed macro under the decoder's first-step categorical.
inline ExpertPrediction predict_experts(const std::vector<StrategyCluster>& clusters, const cooperator::Decoder& dec,
                                        const kitchen::ObservationVec& o, MacroAction observed, Rng& rng,
                                        bool fixed_latent = false) {
  ExpertPrediction out;
  for (const auto& c : clusters) {
    Eigen::VectorXd z = fixed_latent ? c.mean : cooperator::sample_latent(c, rng);
    const Eigen::VectorXd p = cooperator::macro_probs(dec, z, o);
    Eigen::Index arg;
    p.maxCoeff(&arg);
    out.predicted.push_back(static_cast<int>(arg));
    out.loss.push_back(-std::log(std::max(p(static_cast<int>(observed)), kProbabilityFloor)));
    out.z.push_back(std::move(z));
  }
  return out;
}

/// Negative log-likelihood of the observed partner macro per cluster.
inline std::vector<double> expert_losses(const std::vector<StrategyCluster>& clusters, const cooperator::Decoder& dec,
                                         const kitchen::ObservationVec& o, MacroAction observed, std::uint64_t seed,
                                         bool fixed_latent = false) {
  Rng rng(seed);
  return predict_experts(clusters, dec, o, observed, rng, fixed_latent).loss;
}

/// One row of the belief diagnostics stream.
struct BeliefRecord {
  int tick = 0;
  std::vector<double> w;
  int leader = 0;
  std::vector<double> losses;  // empty when no partner macro was observed
  int observed = -1;           // observed partner macro id or -1
};

struct AdaptResult {
  PrimitiveAction action = PrimitiveAction::stay;
  BeliefState belief;
  int leader = 0;
  std::vector<double> losses;
};

inline void check_dimensions(const std::vector<StrategyCluster>& clusters, const CooperatorPolicy& pi,
                             const cooperator::Decoder& dec) {
  if (clusters.empty()) throw ConfigError("adaptation: no clusters");
  if (pi.K != static_cast<int>(clusters.size()))
    throw ConfigError("adaptation: policy bias table has " + std::to_string(pi.K) + " rows but there are " +
                      std::to_string(clusters.size()) + " clusters");
  if (clusters[0].mean.size() != dec.cfg.latent_dim)
    throw ConfigError("adaptation: cluster dimension differs from the decoder latent size");
}

/// One tick of online adaptation: update the belief if a new partner macro
/// was observed, pick the leading cluster and sample the cooperator action
/// from the biased policy.
inline AdaptResult adapt_step(const BeliefState& belief, const std::vector<StrategyCluster>& clusters,
                              const cooperator::Decoder& dec, const CooperatorPolicy& pi, const PolicyInput& in,
                              const std::optional<PartnerEvidence>& evidence, Rng& rng, bool fixed_latent = false) {
  check_dimensions(clusters, pi, dec);
  require(belief.size() == static_cast<int>(clusters.size()), "adapt_step: belief size differs from the cluster count");
  AdaptResult r;
  r.belief = belief;
  if (evidence) {
    r.losses = predict_experts(clusters, dec, evidence->partner_obs, evidence->macro, rng, fixed_latent).loss;
    r.belief = fixed_share_update(belief, r.losses);
  }
  r.leader = leading_expert(r.belief);
  const auto p = cooperator::softmax(cooperator::biased_logits(pi, in, r.leader));
  r.action = static_cast<PrimitiveAction>(cooperator::sample_categorical(p, rng.uniform()));
  return r;
}

/// The adaptive cooperator as a seat agent. Tracks the partner's macro
/// actions with the streaming labeler and keeps the belief trace.
class TalentsAgent final : public partners::Agent {
 public:
  struct Options {
    double eta = kDefaultEta;
    double alpha = kDefaultAlpha;
    bool static_belief = false;  // Hedge (no sharing)
    bool fixed_latent = false;   // score experts at mu_c instead of sampling
    std::string name = "talents";
  };

  TalentsAgent(std::shared_ptr<const CooperatorPolicy> pi, std::vector<StrategyCluster> clusters, DecoderPtr dec,
               Options opt)
      : pi_(std::move(pi)), clusters_(std::move(clusters)), dec_(std::move(dec)), opt_(std::move(opt)) {
    check_dimensions(clusters_, *pi_, *dec_);
  }

  std::string id() const override { return opt_.name; }
  const BeliefState& belief() const { return belief_; }
  const std::vector<BeliefRecord>& trace() const { return trace_; }

  void reset(const GameState& s, int seat, std::uint64_t seed) override {
    const int K = static_cast<int>(clusters_.size());
    belief_ = opt_.static_belief ? init_static_belief(K, opt_.eta) : init_belief(K, opt_.eta, opt_.alpha);
    rng_ = Rng(seed);
    labeler_.reset(s);
    anchor_obs_ = kitchen::observe(s, 1 - seat);
    pending_.reset();
    trace_.clear();
  }

  PrimitiveAction act(const GameState& s, int seat) override {
    const PolicyInput in = cooperator::make_input(s, seat);
    AdaptResult r = adapt_step(belief_, clusters_, *dec_, *pi_, in, pending_, rng_, opt_.fixed_latent);
    trace_.push_back({s.tick, r.belief.w, r.leader, r.losses, pending_ ? static_cast<int>(pending_->macro) : -1});
    belief_ = std::move(r.belief);
    pending_.reset();
    return r.action;
  }

  void observe(const kitchen::StepResult& r, int seat) override {
    const int partner = 1 - seat;
    const auto labels = labeler_.observe(r.state, r.events);
    if (const auto& m = labels[static_cast<std::size_t>(partner)]) {
      pending_ = PartnerEvidence{*m, anchor_obs_};
      anchor_obs_ = kitchen::observe(r.state, partner);
    }
  }

 private:
  std::shared_ptr<const CooperatorPolicy> pi_;
  std::vector<StrategyCluster> clusters_;
  DecoderPtr dec_;
  Options opt_;
  BeliefState belief_;
  Rng rng_;
  kitchen::MacroLabeler labeler_;
  kitchen::ObservationVec anchor_obs_;
  std::optional<PartnerEvidence> pending_;
  std::vector<BeliefRecord> trace_;
};

/// Cooperator with a fixed conditioning (the unconditioned best response
/// uses cluster 0 of an empty bias table).
class FixedCooperatorAgent final : public partners::Agent {
 public:
  FixedCooperatorAgent(std::shared_ptr<const CooperatorPolicy> pi, int cluster, std::string name)
      : pi_(std::move(pi)), cluster_(cluster), name_(std::move(name)) {
    if (pi_->K > 0) pi_->check_cluster(cluster_);
  }
  std::string id() const override { return name_; }
  void reset(const GameState&, int, std::uint64_t seed) override { rng_ = Rng(seed); }
  PrimitiveAction act(const GameState& s, int seat) override {
    const auto p = cooperator::softmax(cooperator::biased_logits(*pi_, cooperator::make_input(s, seat), cluster_));
    return static_cast<PrimitiveAction>(cooperator::sample_categorical(p, rng_.uniform()));
  }

 private:
  std::shared_ptr<const CooperatorPolicy> pi_;
  int cluster_;
  std::string name_;
  Rng rng_;
};

}  // namespace talents::adaptation
