#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "talents/core/error.hpp"
#include "talents/core/hash.hpp"
#include "talents/kitchen/env.hpp"
#include "talents/kitchen/macro.hpp"
#include "talents/kitchen/observe.hpp"

namespace talents::kitchen {

using StoredObservation = std::vector<float>;

struct TrajectoryStep {
  int tick = 0;
  std::array<StoredObservation, 2> obs;  // o_t seen by each seat before acting
  JointAction actions{};
  std::array<int, 2> reward{};
  std::vector<Event> events;
};

/// One two-seat rollout. Observations are stored at float precision.
struct Trajectory {
  std::string layout;
  std::uint64_t layout_version = 0;
  std::uint64_t seed = 0;
  int episode_length = 0;
  std::array<std::string, 2> policy_ids;
  std::vector<TrajectoryStep> steps;
  std::array<std::vector<MacroLabel>, 2> labels;
  int score = 0;
};

inline StoredObservation to_stored(const ObservationVec& o) { return {o.begin(), o.end()}; }
inline ObservationVec from_stored(const StoredObservation& o) { return {o.begin(), o.end()}; }

/// Resolves a trajectory's layout and checks the recorded version.
inline LayoutPtr trajectory_layout(const Trajectory& t) {
  LayoutPtr layout = builtin_layout(t.layout);
  if (layout->version != t.layout_version)
    throw FormatError("trajectory layout '" + t.layout + "' version " + hex64(t.layout_version) +
                      " does not match current version " + hex64(layout->version));
  return layout;
}

/// Re-derives macro labels by replaying the recorded actions from the header
/// seed. Labels depend only on the replayed state-event stream.
inline std::array<std::vector<MacroLabel>, 2> label_macro_actions(const Trajectory& t,
                                                                   int idle_threshold = MacroLabeler::kDefaultIdleThreshold) {
  GameState s = initial_state(trajectory_layout(t), t.seed, t.episode_length);
  MacroLabeler labeler(idle_threshold);
  labeler.reset(s);
  std::array<std::vector<MacroLabel>, 2> out;
  for (const auto& step : t.steps) {
    if (s.terminal()) throw FormatError("trajectory longer than its episode length");
    auto r = kitchen::step(s, step.actions);
    auto labels = labeler.observe(r.state, r.events);
    for (int p = 0; p < 2; ++p)
      if (labels[static_cast<std::size_t>(p)])
        out[static_cast<std::size_t>(p)].push_back({step.tick, *labels[static_cast<std::size_t>(p)]});
    s = std::move(r.state);
  }
  return out;
}

/// True when replaying the actions reproduces the stored observations,
/// rewards and events exactly.
inline bool replay_matches(const Trajectory& t, std::string* why = nullptr) {
  GameState s = initial_state(trajectory_layout(t), t.seed, t.episode_length);
  auto fail = [&](const std::string& m) {
    if (why) *why = m;
    return false;
  };
  for (const auto& step : t.steps) {
    if (s.tick != step.tick) return fail("tick mismatch at " + std::to_string(step.tick));
    for (int p = 0; p < 2; ++p)
      if (to_stored(observe(s, p)) != step.obs[static_cast<std::size_t>(p)])
        return fail("observation mismatch at tick " + std::to_string(step.tick));
    auto r = kitchen::step(s, step.actions);
    if (r.reward != step.reward) return fail("reward mismatch at tick " + std::to_string(step.tick));
    if (r.events != step.events) return fail("event mismatch at tick " + std::to_string(step.tick));
    s = std::move(r.state);
  }
  if (s.score != t.score) return fail("final score mismatch");
  return true;
}

// ---------------------------------------------------------------------------
// Text serialization (line-delimited, version 1). Floats use the shortest
// representation that round-trips.
//
//   #talents-trajectory 1
//   #header layout=<id> layout_version=<hex> seed=<n> episode_length=<n> seat0=<id> seat1=<id>
//   <tick>\t<obs0 csv>\t<obs1 csv>\t<a0>,<a1>\t<r0>,<r1>\t<events>
//   ...
//   #labels0 <tick>:<label>,...
//   #labels1 <tick>:<label>,...
//   #end score=<n>
//
// Events are ';'-separated kind:player:x:y:item:value records.
// ---------------------------------------------------------------------------

inline constexpr std::string_view kTrajectoryMagic = "#talents-trajectory 1";

namespace detail {

inline void write_floats(std::ostream& os, const StoredObservation& v) {
  // Shortest round-trip representation; most features are 0 or +-1.
  std::string line;
  line.reserve(v.size() * 6);
  char buf[32];
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) line.push_back(',');
    const auto res = std::to_chars(buf, buf + sizeof buf, v[i]);
    line.append(buf, res.ptr);
  }
  os << line;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline int parse_int(const std::string& s) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw FormatError("trajectory: bad integer '" + s + "'");
  return v;
}

inline StoredObservation parse_floats(const std::string& s) {
  StoredObservation out;
  if (s.empty()) return out;
  const char* p = s.data();
  const char* end = s.data() + s.size();
  while (p <= end) {
    float v = 0.0f;
    const auto res = std::from_chars(p, end, v);
    if (res.ec != std::errc{} || (res.ptr != end && *res.ptr != ','))
      throw FormatError("trajectory: bad float near '" + std::string(p, std::min<std::size_t>(16, static_cast<std::size_t>(end - p))) + "'");
    out.push_back(v);
    p = res.ptr + 1;
  }
  return out;
}

}  // namespace detail

inline void write_trajectory(std::ostream& os, const Trajectory& t) {
  os << kTrajectoryMagic << '\n';
  os << "#header layout=" << t.layout << " layout_version=" << hex64(t.layout_version) << " seed=" << t.seed
     << " episode_length=" << t.episode_length << " seat0=" << t.policy_ids[0] << " seat1=" << t.policy_ids[1]
     << '\n';
  for (const auto& st : t.steps) {
    os << st.tick << '\t';
    detail::write_floats(os, st.obs[0]);
    os << '\t';
    detail::write_floats(os, st.obs[1]);
    os << '\t' << to_string(st.actions[0]) << ',' << to_string(st.actions[1]) << '\t' << st.reward[0] << ','
       << st.reward[1] << '\t';
    for (std::size_t i = 0; i < st.events.size(); ++i) {
      const Event& e = st.events[i];
      if (i) os << ';';
      os << to_string(e.kind) << ':' << e.player << ':' << e.where.x << ':' << e.where.y << ':' << to_string(e.item)
         << ':' << e.value;
    }
    os << '\n';
  }
  for (int p = 0; p < 2; ++p) {
    os << "#labels" << p << ' ';
    const auto& ls = t.labels[static_cast<std::size_t>(p)];
    for (std::size_t i = 0; i < ls.size(); ++i) {
      if (i) os << ',';
      os << ls[i].tick << ':' << to_string(ls[i].action);
    }
    os << '\n';
  }
  os << "#end score=" << t.score << '\n';
}

inline Trajectory read_trajectory(std::istream& is) {
  Trajectory t;
  std::string line;
  if (!std::getline(is, line) || line != kTrajectoryMagic) throw FormatError("trajectory: missing magic line");
  if (!std::getline(is, line) || line.rfind("#header ", 0) != 0) throw FormatError("trajectory: missing header");
  {
    std::istringstream hs(line.substr(8));
    std::string tok;
    int seen = 0;
    while (hs >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) throw FormatError("trajectory: bad header token '" + tok + "'");
      const std::string k = tok.substr(0, eq), v = tok.substr(eq + 1);
      if (k == "layout") t.layout = v;
      else if (k == "layout_version") t.layout_version = std::stoull(v, nullptr, 16);
      else if (k == "seed") t.seed = std::stoull(v);
      else if (k == "episode_length") t.episode_length = detail::parse_int(v);
      else if (k == "seat0") t.policy_ids[0] = v;
      else if (k == "seat1") t.policy_ids[1] = v;
      else throw FormatError("trajectory: unknown header key '" + k + "'");
      ++seen;
    }
    if (seen != 6) throw FormatError("trajectory: incomplete header");
  }
  bool ended = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line.rfind("#labels", 0) == 0) {
      const int p = line.size() > 7 ? line[7] - '0' : -1;
      if (p != 0 && p != 1) throw FormatError("trajectory: bad labels line");
      const std::string body = line.size() > 9 ? line.substr(9) : std::string{};
      if (!body.empty()) {
        for (const auto& rec : detail::split(body, ',')) {
          const auto parts = detail::split(rec, ':');
          if (parts.size() != 2) throw FormatError("trajectory: bad label record");
          auto m = parse_macro(parts[1]);
          if (!m) throw FormatError("trajectory: unknown macro '" + parts[1] + "'");
          t.labels[static_cast<std::size_t>(p)].push_back({detail::parse_int(parts[0]), *m});
        }
      }
      continue;
    }
    if (line.rfind("#end score=", 0) == 0) {
      t.score = detail::parse_int(line.substr(11));
      ended = true;
      break;
    }
    const auto cols = detail::split(line, '\t');
    if (cols.size() != 6) throw FormatError("trajectory: expected 6 columns per tick");
    TrajectoryStep st;
    st.tick = detail::parse_int(cols[0]);
    st.obs[0] = detail::parse_floats(cols[1]);
    st.obs[1] = detail::parse_floats(cols[2]);
    const auto acts = detail::split(cols[3], ',');
    const auto rews = detail::split(cols[4], ',');
    if (acts.size() != 2 || rews.size() != 2) throw FormatError("trajectory: bad action/reward column");
    for (int p = 0; p < 2; ++p) {
      auto a = parse_primitive(acts[static_cast<std::size_t>(p)]);
      if (!a) throw FormatError("trajectory: unknown action '" + acts[static_cast<std::size_t>(p)] + "'");
      st.actions[static_cast<std::size_t>(p)] = *a;
      st.reward[static_cast<std::size_t>(p)] = detail::parse_int(rews[static_cast<std::size_t>(p)]);
    }
    if (!cols[5].empty()) {
      for (const auto& rec : detail::split(cols[5], ';')) {
        const auto f = detail::split(rec, ':');
        if (f.size() != 6) throw FormatError("trajectory: bad event record");
        Event e;
        e.tick = st.tick;
        bool kind_ok = false, item_ok = false;
        for (std::size_t k = 0; k < kEventNames.size(); ++k)
          if (kEventNames[k] == f[0]) {
            e.kind = static_cast<EventKind>(k);
            kind_ok = true;
          }
        for (std::size_t k = 0; k < kItemNames.size(); ++k)
          if (kItemNames[k] == f[4]) {
            e.item = static_cast<Item>(k);
            item_ok = true;
          }
        if (!kind_ok || !item_ok) throw FormatError("trajectory: unknown event kind or item");
        e.player = detail::parse_int(f[1]);
        e.where = {detail::parse_int(f[2]), detail::parse_int(f[3])};
        e.value = detail::parse_int(f[5]);
        st.events.push_back(e);
      }
    }
    t.steps.push_back(std::move(st));
  }
  if (!ended) throw FormatError("trajectory: missing #end line");
  return t;
}

inline void save_trajectory(const std::string& path, const Trajectory& t) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write trajectory " + path);
  write_trajectory(f, t);
  if (!f) throw IoError("write failed for " + path);
}

inline Trajectory load_trajectory(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open trajectory " + path);
  return read_trajectory(f);
}

}  // namespace talents::kitchen
