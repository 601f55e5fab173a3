#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "talents/adaptation/adapter.hpp"
#include "talents/kitchen/trajectory.hpp"
#include "talents/partners/agent.hpp"
#include "talents/service/protocol.hpp"

namespace talents::service {

namespace fs = std::filesystem;

inline constexpr int kMinTickMs = 50;
inline constexpr int kRoundMs = 4 * 60 * 1000;
inline constexpr int kHumanSeat = 0;
inline constexpr int kAgentSeat = 1;

enum class Status { lobby, running, finished };

inline const char* status_name(Status s) {
  switch (s) {
    case Status::lobby: return "lobby";
    case Status::running: return "running";
    default: return "finished";
  }
}

struct SessionOptions {
  std::string layout = "hallway";
  std::string agent = "talents";
  int tick_ms = 150;
  int round_ms = kRoundMs;
  int rate_cap = 2;  // agent may act (non-stay) at most once every rate_cap ticks
  int grace_ms = 10000;
  std::uint64_t seed = 0;
  bool expose_belief = false;

  void validate() const {
    if (tick_ms < kMinTickMs) throw Rejected("tick_ms " + std::to_string(tick_ms) + " is below the 50 ms floor");
    if (round_ms < tick_ms) throw Rejected("round shorter than one tick");
    if (rate_cap < 1) throw Rejected("rate cap must be >= 1");
    if (grace_ms < 0) throw Rejected("grace period must be >= 0");
  }
  int episode_length() const { return round_ms / tick_ms; }

  json to_json() const {
    return {{"layout", layout},     {"agent", agent},       {"tick_ms", tick_ms}, {"round_ms", round_ms},
            {"rate_cap", rate_cap}, {"grace_ms", grace_ms}, {"seed", seed},       {"expose_belief", expose_belief}};
  }
};

/// Snapshot messages for a recorded trajectory, regenerated by replaying its
/// actions. Belief vectors are not part of the replay.
inline std::vector<json> replay_snapshots(const kitchen::Trajectory& t, const std::string& id, int tick_ms) {
  GameState s = kitchen::initial_state(kitchen::trajectory_layout(t), t.seed, t.episode_length);
  std::vector<json> out;
  for (const auto& st : t.steps) {
    auto r = kitchen::step(s, st.actions);
    out.push_back(snapshot_message(id, r.state, state_delta(s, r.state), false, tick_ms, std::nullopt));
    s = std::move(r.state);
  }
  return out;
}

/// Largest number of non-stay actions by `seat` inside any window of
/// `window` consecutive ticks.
inline int max_actions_in_window(const kitchen::Trajectory& t, int seat, int window) {
  int best = 0, cur = 0;
  const auto& steps = t.steps;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    cur += steps[i].actions[static_cast<std::size_t>(seat)] != PrimitiveAction::stay;
    if (i >= static_cast<std::size_t>(window))
      cur -= steps[i - static_cast<std::size_t>(window)].actions[static_cast<std::size_t>(seat)] != PrimitiveAction::stay;
    best = std::max(best, cur);
  }
  return best;
}

/// One live game: the human (or a remote scripted client) in seat 0, the
/// agent runtime in seat 1. The owner drives the clock by calling advance()
/// once per tick; the state never moves otherwise.
class Session {
 public:
  Session(std::string id, SessionOptions opt, std::unique_ptr<partners::Agent> agent)
      : id_(std::move(id)), opt_(std::move(opt)), agent_(std::move(agent)) {
    opt_.validate();
    require(agent_ != nullptr, "session: no agent runtime");
    state_ = kitchen::initial_state(kitchen::builtin_layout(opt_.layout), opt_.seed, opt_.episode_length());
    agent_->reset(state_, kAgentSeat, derive_seed(opt_.seed, 2));
    labeler_.reset(state_);
    traj_.layout = state_.layout->name;
    traj_.layout_version = state_.layout->version;
    traj_.seed = opt_.seed;
    traj_.episode_length = state_.episode_length;
    traj_.policy_ids = {"human", agent_->id()};
  }

  const std::string& id() const { return id_; }
  const SessionOptions& options() const { return opt_; }

  Status status() const {
    std::lock_guard lock(mu_);
    return status_;
  }
  int tick() const {
    std::lock_guard lock(mu_);
    return state_.tick;
  }
  int score() const {
    std::lock_guard lock(mu_);
    return state_.score;
  }
  GameState state() const {
    std::lock_guard lock(mu_);
    return state_;
  }

  json info() const {
    std::lock_guard lock(mu_);
    return info_locked();
  }

  /// A client attaches. The first join starts the round. Returns the full
  /// snapshot to send to that client.
  json join() {
    std::lock_guard lock(mu_);
    if (status_ == Status::finished) throw Rejected("session " + id_ + " has finished");
    if (status_ == Status::lobby) status_ = Status::running;
    connected_ = true;
    disconnected_ticks_ = 0;
    return full_locked();
  }

  /// The client went away; the round continues with stay inputs until the
  /// grace period runs out.
  void leave() {
    std::lock_guard lock(mu_);
    connected_ = false;
    disconnected_ticks_ = 0;
  }

  /// Buffers the human action for the next tick boundary (last write wins).
  /// Returns the tick that will consume it.
  int submit_input(PrimitiveAction a) {
    std::lock_guard lock(mu_);
    if (status_ == Status::finished) throw Rejected("session " + id_ + " has finished");
    if (status_ != Status::running) throw Rejected("session " + id_ + " is not running");
    pending_ = a;
    return state_.tick;
  }

  json full_snapshot() const {
    std::lock_guard lock(mu_);
    return full_locked();
  }

  /// Advances one tick when running. Returns the messages to broadcast: a
  /// snapshot, followed by the finished summary on the last tick.
  std::vector<json> advance() {
    std::lock_guard lock(mu_);
    std::vector<json> out;
    if (status_ != Status::running) return out;
    if (!connected_ && ++disconnected_ticks_ * opt_.tick_ms > opt_.grace_ms) {
      finish_locked("abandoned");
      out.push_back(finished_locked());
      return out;
    }
    const PrimitiveAction human = pending_.value_or(PrimitiveAction::stay);
    pending_.reset();
    PrimitiveAction agent = agent_->act(state_, kAgentSeat);
    if (agent != PrimitiveAction::stay) {
      if (last_agent_action_ >= 0 && state_.tick - last_agent_action_ < opt_.rate_cap)
        agent = PrimitiveAction::stay;
      else
        last_agent_action_ = state_.tick;
    }
    kitchen::TrajectoryStep st;
    st.tick = state_.tick;
    for (int p = 0; p < 2; ++p) st.obs[static_cast<std::size_t>(p)] = kitchen::to_stored(kitchen::observe(state_, p));
    st.actions[kHumanSeat] = human;
    st.actions[kAgentSeat] = agent;
    kitchen::StepResult r = kitchen::step(state_, st.actions);
    agent_->observe(r, kAgentSeat);
    st.reward = r.reward;
    st.events = r.events;
    const auto labels = labeler_.observe(r.state, r.events);
    for (int p = 0; p < 2; ++p)
      if (labels[static_cast<std::size_t>(p)]) traj_.labels[static_cast<std::size_t>(p)].push_back({st.tick, *labels[static_cast<std::size_t>(p)]});
    traj_.steps.push_back(std::move(st));
    json snap = snapshot_message(id_, r.state, state_delta(state_, r.state), false, opt_.tick_ms, belief_locked());
    state_ = std::move(r.state);
    traj_.score = state_.score;
    snapshots_.push_back(snap);
    out.push_back(std::move(snap));
    if (state_.terminal()) {
      finish_locked("completed");
      out.push_back(finished_locked());
    }
    return out;
  }

  kitchen::Trajectory trajectory() const {
    std::lock_guard lock(mu_);
    return traj_;
  }
  std::vector<adaptation::BeliefRecord> belief_trace() const {
    std::lock_guard lock(mu_);
    return belief_trace_locked();
  }
  std::vector<json> snapshots() const {
    std::lock_guard lock(mu_);
    return snapshots_;
  }
  json finished_message() const {
    std::lock_guard lock(mu_);
    return finished_locked();
  }

  /// Everything a replay needs: options, per-tick actions, snapshots and the
  /// agent's belief trace.
  json replay() const {
    std::lock_guard lock(mu_);
    json actions = json::array();
    for (const auto& st : traj_.steps)
      actions.push_back({std::string(kitchen::to_string(st.actions[0])), std::string(kitchen::to_string(st.actions[1]))});
    json belief = json::array();
    for (const auto& b : belief_trace_locked()) belief.push_back({{"tick", b.tick}, {"w", b.w}, {"leader", b.leader}});
    return {{"v", kProtocolVersion},
            {"session", info_locked()},
            {"options", opt_.to_json()},
            {"layout_version", hex64(traj_.layout_version)},
            {"actions", actions},
            {"snapshots", snapshots_},
            {"belief", belief}};
  }

  /// Writes `<dir>/<id>.traj` and `<dir>/<id>.replay.json`.
  void persist(const std::string& dir) const {
    fs::create_directories(dir);
    kitchen::save_trajectory((fs::path(dir) / (id_ + ".traj")).string(), trajectory());
    const std::string path = (fs::path(dir) / (id_ + ".replay.json")).string();
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << replay().dump() << '\n';
  }

 private:
  json info_locked() const {
    return {{"id", id_},
            {"layout", opt_.layout},
            {"agent", opt_.agent},
            {"status", status_name(status_)},
            {"tick", state_.tick},
            {"score", state_.score},
            {"episode_length", state_.episode_length},
            {"tick_ms", opt_.tick_ms},
            {"connected", connected_},
            {"end_reason", end_reason_}};
  }

  json full_locked() const {
    return snapshot_message(id_, state_, full_state(state_), true, opt_.tick_ms, belief_locked());
  }

  std::optional<std::vector<double>> belief_locked() const {
    if (!opt_.expose_belief) return std::nullopt;
    const auto* ta = dynamic_cast<const adaptation::TalentsAgent*>(agent_.get());
    if (!ta || ta->trace().empty()) return std::nullopt;
    return ta->trace().back().w;
  }

  std::vector<adaptation::BeliefRecord> belief_trace_locked() const {
    const auto* ta = dynamic_cast<const adaptation::TalentsAgent*>(agent_.get());
    return ta ? ta->trace() : std::vector<adaptation::BeliefRecord>{};
  }

  void finish_locked(const std::string& reason) {
    status_ = Status::finished;
    end_reason_ = reason;
  }

  json finished_locked() const {
    int agent_actions = 0;
    for (const auto& st : traj_.steps) agent_actions += st.actions[kAgentSeat] != PrimitiveAction::stay;
    return {{"v", kProtocolVersion},
            {"type", "finished"},
            {"session", id_},
            {"summary",
             {{"score", state_.score},
              {"ticks", state_.tick},
              {"deliveries", state_.deliveries},
              {"expirations", state_.expirations},
              {"agent_actions", agent_actions},
              {"reason", end_reason_}}}};
  }

  std::string id_;
  SessionOptions opt_;
  std::unique_ptr<partners::Agent> agent_;
  mutable std::mutex mu_;
  Status status_ = Status::lobby;
  GameState state_;
  kitchen::MacroLabeler labeler_;
  kitchen::Trajectory traj_;
  std::vector<json> snapshots_;
  std::optional<PrimitiveAction> pending_;
  int last_agent_action_ = -1;
  bool connected_ = false;
  int disconnected_ticks_ = 0;
  std::string end_reason_;
};

}  // namespace talents::service
