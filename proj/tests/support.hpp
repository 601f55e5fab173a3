#pragma once

#include <string>
#include <vector>

#include "talents/core/rng.hpp"
#include "talents/kitchen/env.hpp"
#include "talents/kitchen/pathing.hpp"

namespace talents::testing {

using namespace talents::kitchen;

/// Steps the game with `player` walking to `target` and interacting once,
/// while the other seat stays. Returns the events of the interacting tick.
inline std::vector<Event> walk_and_interact(GameState& s, int player, Coord target, int max_ticks = 60) {
  for (int i = 0; i < max_ticks && !s.terminal(); ++i) {
    const auto step = astar_step(*s.layout, s.players[static_cast<std::size_t>(player)], {target});
    JointAction ja{PrimitiveAction::stay, PrimitiveAction::stay};
    ja[static_cast<std::size_t>(player)] = step.action;
    auto r = kitchen::step(s, ja);
    s = std::move(r.state);
    if (step.action == PrimitiveAction::interact) return r.events;
  }
  return {};
}

inline JointAction random_joint(Rng& rng) {
  return {static_cast<PrimitiveAction>(rng.below(kNumPrimitiveActions)),
          static_cast<PrimitiveAction>(rng.below(kNumPrimitiveActions))};
}

inline std::string source_path(const std::string& rel) { return std::string(TALENTS_SOURCE_DIR) + "/" + rel; }

}  // namespace talents::testing
