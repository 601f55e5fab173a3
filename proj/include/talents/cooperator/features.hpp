#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "talents/kitchen/observe.hpp"
#include "talents/partners/planner.hpp"

namespace talents::cooperator {

using kitchen::GameState;
using kitchen::Item;
using kitchen::kNumMacroActions;
using kitchen::kNumPrimitiveActions;
using kitchen::MacroAction;
using kitchen::PrimitiveAction;

/// Per-macro route hints for the acting seat: for every macro action, the
/// primitive a neutral planner would take toward that macro's best goal, and
/// the goal's distance-discounted utility. Infeasible macros have no hint.
struct MacroHints {
  std::array<int, kNumMacroActions> step{};      // primitive id, -1 when infeasible
  std::array<double, kNumMacroActions> score{};  // 0 when infeasible
};

inline constexpr int kHintFeatures = 2 * kNumMacroActions;

inline MacroHints macro_hints(const GameState& s, int p) {
  using namespace partners;
  MacroHints h;
  h.step.fill(-1);
  const Reach reach = Reach::from(s, p);
  const auto pref = neutral_preference();
  const auto goals = enumerate_goals(s, p, pref, reach, s.players[static_cast<std::size_t>(p)].held);
  std::array<std::vector<Goal>, kNumMacroActions> by_macro;
  for (const auto& g : goals) by_macro[static_cast<std::size_t>(g.macro)].push_back(g);
  for (int m = 0; m < kNumMacroActions; ++m) {
    const auto mu = static_cast<std::size_t>(m);
    if (m == static_cast<int>(MacroAction::idle)) {
      h.step[mu] = static_cast<int>(PrimitiveAction::stay);
      continue;
    }
    if (by_macro[mu].empty()) continue;
    const Choice c = choose_goal(s, pref, by_macro[mu], reach);
    if (c.goal.macro != static_cast<MacroAction>(m)) continue;
    h.step[mu] = static_cast<int>(step_toward_goal(s, p, c.goal, pref.style, 0));
    h.score[mu] = c.score;
  }
  return h;
}

/// Hint features appended to the observation: [feasible flags ; scores].
inline void hint_features(const MacroHints& h, double* out) {
  for (int m = 0; m < kNumMacroActions; ++m) {
    out[m] = h.step[static_cast<std::size_t>(m)] >= 0 ? 1.0 : 0.0;
    out[kNumMacroActions + m] = h.score[static_cast<std::size_t>(m)];
  }
}

/// Potential over the shared kitchen state used for reward shaping: partial
/// progress toward dishes, wherever it sits (stations, hands, counters).
inline double item_potential(Item i) {
  switch (i) {
    case Item::onion:
    case Item::rice:
    case Item::protein:
    case Item::plate: return 1.0;
    case Item::plate_rice:
    case Item::plate_protein: return 5.0;
    case Item::rice_dish: return 10.0;
    case Item::soup_dish: return 12.0;
    default: return 0.0;
  }
}

inline double kitchen_potential(const GameState& s) {
  double phi = 0.0;
  for (const auto& st : s.stations) {
    if (st.phase == kitchen::StationPhase::burnt) continue;
    double v = 2.0 * st.loaded();
    if (st.phase == kitchen::StationPhase::cooking || st.phase == kitchen::StationPhase::ready)
      v += st.kind == kitchen::StationKind::pot ? 2.0 : 1.0;
    phi += v;
  }
  for (const auto& pl : s.players) phi += item_potential(pl.held);
  for (Item i : s.counter_items) phi += item_potential(i);
  return phi;
}

}  // namespace talents::cooperator
