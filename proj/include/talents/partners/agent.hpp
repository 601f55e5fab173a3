#pragma once

#include <memory>
#include <string>
#include <vector>

#include "talents/kitchen/trajectory.hpp"
#include "talents/partners/planner.hpp"

namespace talents::partners {

/// Anything that can occupy a seat: scripted partners, generative partners,
/// cooperators, remote humans.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual std::string id() const = 0;
  /// Called once per episode before the first act().
  virtual void reset(const GameState& /*initial*/, int /*seat*/, std::uint64_t /*seed*/) {}
  virtual PrimitiveAction act(const GameState& s, int seat) = 0;
  /// Called after every step with the post-step state and the step's events.
  virtual void observe(const StepResult& /*r*/, int /*seat*/) {}
};

using AgentPtr = std::shared_ptr<Agent>;

/// Scripted behavior-preference partner. Re-plans every tick: picks the goal
/// with the best shaping-weighted, distance-discounted utility and takes one
/// A* step toward it. Stateless, so the action is a function of (state, seed).
class ScriptedPolicy final : public Agent {
 public:
  ScriptedPolicy(std::string id, BehaviorPreference pref) : id_(std::move(id)), pref_(pref) { pref_.validate(); }

  std::string id() const override { return id_; }
  const BehaviorPreference& preference() const { return pref_; }

  /// Same policy at a different competence level (emulated checkpoint).
  ScriptedPolicy with_noise(double eps) const {
    BehaviorPreference p = pref_;
    p.competence_noise = eps;
    return ScriptedPolicy(id_, p);
  }

  PrimitiveAction act(const GameState& s, int seat) override { return decide(s, seat).second; }

  /// The chosen goal and the primitive taken toward it.
  std::pair<Goal, PrimitiveAction> decide(const GameState& s, int seat) const {
    const Reach reach = Reach::from(s, seat);
    const auto goals = enumerate_goals(s, seat, pref_, reach, s.players[static_cast<std::size_t>(seat)].held);
    const Choice c = choose_goal(s, pref_, goals, reach);
    if (pref_.competence_noise > 0.0 && tick_noise(pref_.seed, s, seat) < pref_.competence_noise) {
      const double u = tick_noise(pref_.seed, s, seat, 0xabc);
      return {c.goal, static_cast<PrimitiveAction>(static_cast<int>(u * kNumPrimitiveActions))};
    }
    return {c.goal, step_toward_goal(s, seat, c.goal, pref_.style, pref_.seed)};
  }

 private:
  std::string id_;
  BehaviorPreference pref_;
};

/// Always stays. Used for solo-capability checks.
class IdleAgent final : public Agent {
 public:
  std::string id() const override { return "idle"; }
  PrimitiveAction act(const GameState&, int) override { return PrimitiveAction::stay; }
};

struct EpisodeOptions {
  int episode_length = 0;     // <= 0: layout default
  bool record = true;         // keep per-tick observations/actions/events
  int switch_tick = -1;       // seat 1 is replaced by `switch_to` from this tick
  Agent* switch_to = nullptr;
};

/// Plays one episode. Seat agents are reset with seeds derived from `seed`.
/// Macro labels are produced online with the streaming labeler.
inline Trajectory play_episode(Agent& a0, Agent& a1, LayoutPtr layout, std::uint64_t seed,
                               const EpisodeOptions& opt = {}) {
  Trajectory t;
  GameState s = initial_state(layout, seed, opt.episode_length);
  t.layout = layout->name;
  t.layout_version = layout->version;
  t.seed = seed;
  t.episode_length = s.episode_length;
  t.policy_ids = {a0.id(), a1.id()};
  std::array<Agent*, 2> seats{&a0, &a1};
  seats[0]->reset(s, 0, derive_seed(seed, 1));
  seats[1]->reset(s, 1, derive_seed(seed, 2));
  MacroLabeler labeler;
  labeler.reset(s);
  while (!s.terminal()) {
    if (opt.switch_to && s.tick == opt.switch_tick) {
      seats[1] = opt.switch_to;
      seats[1]->reset(s, 1, derive_seed(seed, 3));
    }
    TrajectoryStep st;
    st.tick = s.tick;
    if (opt.record) st.obs = {to_stored(observe(s, 0)), to_stored(observe(s, 1))};
    st.actions = {seats[0]->act(s, 0), seats[1]->act(s, 1)};
    StepResult r = step(s, st.actions);
    seats[0]->observe(r, 0);
    seats[1]->observe(r, 1);
    const auto labels = labeler.observe(r.state, r.events);
    for (int p = 0; p < 2; ++p)
      if (labels[static_cast<std::size_t>(p)])
        t.labels[static_cast<std::size_t>(p)].push_back({st.tick, *labels[static_cast<std::size_t>(p)]});
    st.reward = r.reward;
    st.events = std::move(r.events);
    if (opt.record) t.steps.push_back(std::move(st));
    s = std::move(r.state);
  }
  t.score = s.score;
  return t;
}

}  // namespace talents::partners
