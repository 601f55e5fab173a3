#pragma once

#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include "talents/kitchen/env.hpp"

namespace talents::kitchen {

/// High-level action vocabulary (exactly ten labels).
enum class MacroAction : std::uint8_t {
  pick_onion,
  pick_rice,
  pick_protein,
  pick_plate,
  load_station,
  plate_dish,
  deliver,
  counter_exchange,  // place on / pick from a counter (hand-offs)
  trash,             // dispose of burnt food or unwanted items
  idle,
};
inline constexpr int kNumMacroActions = 10;

inline constexpr std::array<std::string_view, kNumMacroActions> kMacroNames = {
    "pick_onion", "pick_rice", "pick_protein",     "pick_plate", "load_station",
    "plate_dish", "deliver",   "counter_exchange", "trash",      "idle"};

inline std::string_view to_string(MacroAction m) { return kMacroNames[static_cast<int>(m)]; }

inline std::optional<MacroAction> parse_macro(std::string_view s) {
  for (int i = 0; i < kNumMacroActions; ++i)
    if (kMacroNames[i] == s) return static_cast<MacroAction>(i);
  return std::nullopt;
}

/// Maps one player event to its macro label; nullopt for events that do not
/// complete a high-level action (illegal interacts, burnt pickup, env events).
inline std::optional<MacroAction> macro_for_event(const Event& e) {
  if (e.player < 0) return std::nullopt;
  switch (e.kind) {
    case EventKind::pickup_ingredient:
      if (e.item == Item::onion) return MacroAction::pick_onion;
      if (e.item == Item::rice) return MacroAction::pick_rice;
      return MacroAction::pick_protein;
    case EventKind::pickup_plate: return MacroAction::pick_plate;
    case EventKind::load_station: return MacroAction::load_station;
    case EventKind::plate_dish: return MacroAction::plate_dish;
    case EventKind::deliver:
    case EventKind::deliver_unmatched: return MacroAction::deliver;
    case EventKind::counter_place:
    case EventKind::counter_pick: return MacroAction::counter_exchange;
    case EventKind::trash: return MacroAction::trash;
    default: return std::nullopt;
  }
}

struct MacroLabel {
  int tick = 0;
  MacroAction action = MacroAction::idle;
  friend bool operator==(const MacroLabel&, const MacroLabel&) = default;
};

/// Streaming macro labeler. Feed every tick's post-step state and events; it
/// emits one label per completed high-level event, plus an `idle` label each
/// time a player stays put without completing anything for idle_threshold
/// consecutive ticks.
class MacroLabeler {
 public:
  static constexpr int kDefaultIdleThreshold = 12;

  explicit MacroLabeler(int idle_threshold = kDefaultIdleThreshold) : idle_threshold_(idle_threshold) {}

  void reset(const GameState& initial) {
    last_pos_ = {initial.players[0].position, initial.players[1].position};
    still_ = {0, 0};
  }

  /// Returns per-player labels completed on this tick (at most one each).
  std::array<std::optional<MacroAction>, 2> observe(const GameState& after, const std::vector<Event>& events) {
    std::array<std::optional<MacroAction>, 2> out;
    for (const Event& e : events) {
      if (e.player < 0) continue;
      if (auto m = macro_for_event(e)) out[static_cast<std::size_t>(e.player)] = *m;
    }
    for (int p = 0; p < 2; ++p) {
      const auto sp = static_cast<std::size_t>(p);
      const Coord pos = after.players[sp].position;
      if (out[sp] || pos != last_pos_[sp]) {
        still_[sp] = 0;
      } else if (++still_[sp] >= idle_threshold_) {
        out[sp] = MacroAction::idle;
        still_[sp] = 0;
      }
      last_pos_[sp] = pos;
    }
    return out;
  }

 private:
  int idle_threshold_;
  std::array<Coord, 2> last_pos_{};
  std::array<int, 2> still_{};
};

}  // namespace talents::kitchen
