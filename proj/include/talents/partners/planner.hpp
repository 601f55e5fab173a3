#pragma once

#include <algorithm>
#include <array>
#include <functional>
#include <optional>
#include <vector>

#include "talents/core/rng.hpp"
#include "talents/kitchen/env.hpp"
#include "talents/kitchen/macro.hpp"
#include "talents/kitchen/pathing.hpp"
#include "talents/partners/preference.hpp"

namespace talents::partners {

using namespace talents::kitchen;

/// A candidate high-level goal: face one of `targets` and interact (or just
/// wait there when `wait` is set, e.g. holding a plate next to a cooking pot).
struct Goal {
  MacroAction macro = MacroAction::idle;
  std::vector<Coord> targets;
  double value = 0.0;
  bool wait = false;
};

/// Navigation context for one player: BFS distances from both players to
/// every floor cell, ignoring the other player's body.
struct Reach {
  std::vector<int> mine;
  std::vector<int> theirs;

  static Reach from(const GameState& s, int p) {
    const Layout& L = *s.layout;
    return {distance_field(L, {s.players[static_cast<std::size_t>(p)].position}),
            distance_field(L, {s.players[static_cast<std::size_t>(1 - p)].position})};
  }

  static int to_tile(const Layout& L, const std::vector<int>& field, Coord t) {
    int d = kUnreachable;
    for (Coord a : access_cells(L, t)) d = std::min(d, field[static_cast<std::size_t>(L.index(a))]);
    return d;
  }
  int mine_to(const Layout& L, Coord t) const { return to_tile(L, mine, t); }
  bool i_reach(const Layout& L, Coord t) const { return mine_to(L, t) < kUnreachable; }
  bool they_reach(const Layout& L, Coord t) const { return to_tile(L, theirs, t) < kUnreachable; }
};

namespace detail {

inline const StationState& station_of(const GameState& s, StationKind k) {
  for (const auto& st : s.stations)
    if (st.kind == k) return st;
  throw ContractViolation("layout has no station of the requested kind");
}

inline std::vector<Coord> tiles_of(const Layout& L, TileKind kind, std::optional<Ingredient> g = std::nullopt) {
  std::vector<Coord> out;
  for (int y = 0; y < L.height; ++y)
    for (int x = 0; x < L.width; ++x) {
      const Tile& t = L.at({x, y});
      if (t.kind == kind && (!g || t.ingredient == *g)) out.push_back({x, y});
    }
  return out;
}

inline Recipe station_recipe(StationKind k) { return k == StationKind::pot ? Recipe::soup : Recipe::rice_dish; }

inline bool active(const StationState& st) {
  return st.phase == StationPhase::cooking || st.phase == StationPhase::ready;
}

}  // namespace detail

/// Enumerates the goals player `p` could pursue while holding `held`.
/// Values come from the preference's shaping weights scaled by current
/// demand (station room, open orders, bonus windows).
inline std::vector<Goal> enumerate_goals(const GameState& s, int p, const BehaviorPreference& pref, const Reach& reach,
                                         Item held, bool allow_counter_pick = true) {
  const Layout& L = *s.layout;
  const auto& partner = s.players[static_cast<std::size_t>(1 - p)];
  std::vector<Goal> out;

  auto order_mult = [&](Recipe r) {
    bool any = false, bonus = false;
    for (const auto& o : s.orders)
      if (o.recipe == r) {
        any = true;
        bonus = bonus || o.in_bonus_window();
      }
    if (!any) return 0.4;
    return 1.0 + 0.5 * pref.w(Shaping::bonus_seeking) * (bonus ? 1.0 : 0.0);
  };
  auto count_loose = [&](auto pred) {
    int n = pred(partner.held) ? 1 : 0;
    for (Item c : s.counter_items) n += pred(c) ? 1 : 0;
    return n;
  };

  std::vector<Coord> counters = detail::tiles_of(L, TileKind::counter);
  std::vector<Coord> empty_mine, empty_shared;
  for (Coord c : counters) {
    if (s.counter_item(c) != Item::none || !reach.i_reach(L, c)) continue;
    empty_mine.push_back(c);
    if (reach.they_reach(L, c)) empty_shared.push_back(c);
  }
  auto park = [&](double value) {
    if (!empty_mine.empty()) out.push_back({MacroAction::counter_exchange, empty_mine, value, false});
  };
  auto hand_off = [&](double value) {
    if (!empty_shared.empty()) out.push_back({MacroAction::counter_exchange, empty_shared, value, false});
  };
  const std::vector<Coord> trash = detail::tiles_of(L, TileKind::trash);

  if (held == Item::none) {
    for (int gi = 0; gi < kNumIngredients; ++gi) {
      const auto g = static_cast<Ingredient>(gi);
      const StationKind k = g == Ingredient::onion ? StationKind::pot
                            : g == Ingredient::rice ? StationKind::rice_cooker
                                                    : StationKind::grill;
      const auto& st = detail::station_of(s, k);
      const int room = st.phase == StationPhase::idle ? station_capacity(k) - st.loaded() : 0;
      const Item item = ingredient_item(g);
      const int loose = count_loose([&](Item i) { return i == item; });
      if (room - loose <= 0) continue;
      const bool usable = reach.i_reach(L, st.position) || (reach.they_reach(L, st.position) && !empty_shared.empty());
      auto sources = detail::tiles_of(L, TileKind::ingredient_source, g);
      if (!usable || sources.empty()) continue;
      const auto macro = static_cast<MacroAction>(static_cast<int>(MacroAction::pick_onion) + gi);
      out.push_back({macro, sources, pref.w(ingredient_term(g)) * order_mult(detail::station_recipe(k)), false});
    }
    // Plates: one per active pot, one per rice dish in progress.
    {
      const bool soup = detail::active(detail::station_of(s, StationKind::pot));
      const bool rice = detail::active(detail::station_of(s, StationKind::rice_cooker)) ||
                        detail::active(detail::station_of(s, StationKind::grill));
      const int plain = count_loose([](Item i) { return i == Item::plate; });
      const int half = count_loose([](Item i) { return i == Item::plate_rice || i == Item::plate_protein; });
      const int need = (soup ? 1 : 0) + std::max(0, (rice ? 1 : 0) - half) - plain;
      auto stacks = detail::tiles_of(L, TileKind::plate_stack);
      if (need > 0 && !stacks.empty()) out.push_back({MacroAction::pick_plate, stacks, pref.w(Shaping::dishwashing), false});
    }
    for (const auto& st : s.stations)
      if (st.phase == StationPhase::burnt && reach.i_reach(L, st.position))
        out.push_back({MacroAction::trash, {st.position}, 1.2 * pref.w(Shaping::dishwashing) + 0.05, false});
    if (allow_counter_pick) {
      for (Coord c : counters) {
        const Item x = s.counter_item(c);
        if (x == Item::none || !reach.i_reach(L, c)) continue;
        double best = 0.0;
        bool partner_can_use = false;
        for (const auto& g : enumerate_goals(s, p, pref, reach, x, false)) {
          if (g.macro == MacroAction::counter_exchange || g.macro == MacroAction::idle) continue;
          best = std::max(best, g.value);
          for (Coord t : g.targets) partner_can_use = partner_can_use || reach.they_reach(L, t);
        }
        // Items only this player can finish are hand-offs and get picked up
        // regardless of how little the player cares for that step.
        if (best > 0.0) out.push_back({MacroAction::counter_exchange, {c}, 0.9 * best + (partner_can_use ? 0.0 : 0.3), false});
      }
    }
  } else if (is_ingredient(held)) {
    const auto g = static_cast<Ingredient>(static_cast<int>(held) - static_cast<int>(Item::onion));
    const StationKind k = g == Ingredient::onion ? StationKind::pot
                          : g == Ingredient::rice ? StationKind::rice_cooker
                                                  : StationKind::grill;
    const auto& st = detail::station_of(s, k);
    const double v = pref.w(ingredient_term(g)) * order_mult(detail::station_recipe(k));
    const bool room = st.phase == StationPhase::idle && st.loaded() < station_capacity(k);
    if (room && reach.i_reach(L, st.position)) out.push_back({MacroAction::load_station, {st.position}, 1.5 * v, false});
    else if (!reach.i_reach(L, st.position) && reach.they_reach(L, st.position)) hand_off(v);
    else park(0.1);
    if (!trash.empty()) out.push_back({MacroAction::trash, trash, 0.02, false});
  } else if (is_dish(held)) {
    auto windows = detail::tiles_of(L, TileKind::delivery_window);
    const bool mine = std::any_of(windows.begin(), windows.end(), [&](Coord c) { return reach.i_reach(L, c); });
    const double v = pref.w(Shaping::delivery) * (1.0 + order_mult(dish_recipe(held)));
    if (mine) out.push_back({MacroAction::deliver, windows, 2.0 * v + 0.1, false});
    else hand_off(1.5 * v + 0.1);
  } else if (is_burnt(held)) {
    const bool mine = std::any_of(trash.begin(), trash.end(), [&](Coord c) { return reach.i_reach(L, c); });
    const double v = 1.5 * pref.w(Shaping::dishwashing) + 0.1;
    if (mine) out.push_back({MacroAction::trash, trash, v, false});
    else hand_off(v);
  } else {
    // Plate-like: plain plate or half-assembled rice dish.
    std::vector<StationKind> fits;
    if (held == Item::plate) fits = {StationKind::pot, StationKind::rice_cooker, StationKind::grill};
    else if (held == Item::plate_rice) fits = {StationKind::grill};
    else fits = {StationKind::rice_cooker};
    bool reachable_active = false, partner_active = false;
    for (StationKind k : fits) {
      const auto& st = detail::station_of(s, k);
      if (!detail::active(st)) continue;
      const double v = pref.w(Shaping::plating) * order_mult(detail::station_recipe(k));
      if (reach.i_reach(L, st.position)) {
        reachable_active = true;
        if (st.phase == StationPhase::ready) out.push_back({MacroAction::plate_dish, {st.position}, 1.5 * v + 0.05, false});
        else out.push_back({MacroAction::plate_dish, {st.position}, 0.6 * v + 0.02, true});
      } else if (reach.they_reach(L, st.position)) {
        partner_active = true;
      }
    }
    if (!reachable_active && partner_active) hand_off(pref.w(Shaping::plating) + 0.02);
    if (!reachable_active) park(0.1);
  }
  // Work the partner cannot physically reach falls to this player whatever
  // its preferences (separated layouts force a division of labour).
  for (auto& g : out) {
    if (g.macro == MacroAction::counter_exchange || g.value <= 0.0) continue;
    bool partner_can = false;
    for (Coord t : g.targets) partner_can = partner_can || reach.they_reach(L, t);
    if (!partner_can) g.value += 0.3;
  }
  return out;
}

/// Score used to rank goals: value discounted by path length. Cautious
/// partners discount distance more steeply, so they favour nearby work.
inline double goal_score(const Goal& g, int distance, Style style) {
  const double k = style == Style::cautious ? 0.2 : 0.08;
  return g.value / (1.0 + k * distance);
}

struct Choice {
  Goal goal;
  int distance = 0;
  double score = 0.0;
};

/// Picks the best goal; ties go to the goal whose nearest target has the
/// lowest coordinate. Returns the idle goal when nothing beats it.
inline Choice choose_goal(const GameState& s, const BehaviorPreference& pref, const std::vector<Goal>& goals,
                          const Reach& reach) {
  const Layout& L = *s.layout;
  Choice best;
  best.goal.macro = MacroAction::idle;
  best.score = std::max(0.0, 0.15 - 0.12 * pref.w(Shaping::idle_penalty));
  std::optional<Coord> best_target;
  for (const auto& g : goals) {
    int d = kUnreachable;
    Coord t{};
    for (Coord c : g.targets) {
      const int dc = reach.mine_to(L, c);
      if (dc < d || (dc == d && c < t)) {
        d = dc;
        t = c;
      }
    }
    if (d >= kUnreachable) continue;
    const double sc = goal_score(g, d, pref.style);
    if (sc > best.score || (sc == best.score && best_target && t < *best_target)) {
      best = {g, d, sc};
      best_target = t;
    }
  }
  return best;
}

/// Deterministic per-tick noise in [0, 1) for (seed, episode, tick, seat).
inline double tick_noise(std::uint64_t seed, const GameState& s, int p, std::uint64_t salt = 0) {
  return unit_double(derive_seed(derive_seed(seed ^ salt, s.rng_seed), static_cast<std::uint64_t>(s.tick) * 2 + static_cast<std::uint64_t>(p)));
}

/// Primitive that advances player `p` toward `goal`. Pathing avoids the
/// partner's cell; cautious players also keep off cells next to it when an
/// alternative exists. A move that would bump into the partner is replaced
/// by a pseudo-random move to break head-on deadlocks in corridors.
/// An idle player standing next to a station, source, window or trash while
/// the partner is close steps to the free neighbour with the fewest such
/// tiles around it, so it does not block the only access cell.
inline PrimitiveAction yield_step(const GameState& s, int p) {
  const Layout& L = *s.layout;
  const Coord me = s.players[static_cast<std::size_t>(p)].position;
  const Coord other = s.players[static_cast<std::size_t>(1 - p)].position;
  if (std::abs(me.x - other.x) + std::abs(me.y - other.y) > 3) return PrimitiveAction::stay;
  auto busy_sides = [&](Coord c) {
    int n = 0;
    for (Orientation o : kNeighbourOrder) {
      const Coord t = step_toward(c, o);
      if (L.in_bounds(t) && L.at(t).kind != TileKind::floor && L.at(t).kind != TileKind::counter) ++n;
    }
    return n;
  };
  int best = busy_sides(me);
  if (best == 0) return PrimitiveAction::stay;
  std::optional<Orientation> move;
  for (Orientation o : kNeighbourOrder) {
    const Coord n = step_toward(me, o);
    if (!L.walkable(n) || n == other) continue;
    if (const int b = busy_sides(n); b < best) {
      best = b;
      move = o;
    }
  }
  return move ? move_action(*move) : PrimitiveAction::stay;
}

inline PrimitiveAction step_toward_goal(const GameState& s, int p, const Goal& goal, Style style, std::uint64_t seed) {
  if (goal.macro == MacroAction::idle || goal.targets.empty()) return yield_step(s, p);
  const Layout& L = *s.layout;
  const auto& me = s.players[static_cast<std::size_t>(p)];
  const Coord other = s.players[static_cast<std::size_t>(1 - p)].position;
  auto near_other = [&](Coord c) { return std::abs(c.x - other.x) + std::abs(c.y - other.y) <= 1; };
  PathStep st;
  if (style == Style::cautious) st = astar_step(L, me, goal.targets, near_other);
  if (!st.found()) st = astar_step(L, me, goal.targets, [&](Coord c) { return c == other; });
  if (!st.found()) {
    st = astar_step(L, me, goal.targets);
    if (!st.found()) return PrimitiveAction::stay;
    const auto o = move_orientation(st.action);
    if (o && step_toward(me.position, *o) == other) {
      const double u = tick_noise(seed, s, p, 0x5eed);
      return static_cast<PrimitiveAction>(static_cast<int>(u * 5.0));  // up/down/left/right/stay
    }
  }
  if (goal.wait && st.action == PrimitiveAction::interact) return PrimitiveAction::stay;
  return st.action;
}

/// Macros that currently have at least one reachable, useful goal. `idle`
/// is always feasible.
inline std::array<bool, kNumMacroActions> feasible_macros(const GameState& s, int p) {
  std::array<bool, kNumMacroActions> ok{};
  ok[static_cast<std::size_t>(MacroAction::idle)] = true;
  const Reach reach = Reach::from(s, p);
  const Layout& L = *s.layout;
  const auto pref = neutral_preference();
  for (const auto& g : enumerate_goals(s, p, pref, reach, s.players[static_cast<std::size_t>(p)].held)) {
    if (g.value <= 0.0) continue;
    for (Coord c : g.targets)
      if (reach.i_reach(L, c)) {
        ok[static_cast<std::size_t>(g.macro)] = true;
        break;
      }
  }
  return ok;
}

/// Realizes one macro action at a time as primitives using the same goal
/// planner as the scripted partners. A macro ends when the player completes
/// a matching event, when it becomes infeasible, or after a timeout.
class MacroExecutor {
 public:
  static constexpr int kIdleTicks = 4;
  static constexpr int kTimeout = 40;

  bool busy() const { return current_.has_value(); }
  std::optional<MacroAction> current() const { return current_; }

  void start(MacroAction m) {
    current_ = m;
    ticks_ = 0;
  }
  void clear() { current_.reset(); }

  /// Next primitive for the running macro; clears it and stays when the
  /// macro has no feasible goal.
  PrimitiveAction act(const GameState& s, int p, std::uint64_t seed) {
    if (!current_) return PrimitiveAction::stay;
    if (*current_ == MacroAction::idle) {
      if (++ticks_ >= kIdleTicks) current_.reset();
      return PrimitiveAction::stay;
    }
    if (++ticks_ > kTimeout) {
      current_.reset();
      return PrimitiveAction::stay;
    }
    const Reach reach = Reach::from(s, p);
    const auto pref = neutral_preference();
    std::vector<Goal> goals;
    for (auto& g : enumerate_goals(s, p, pref, reach, s.players[static_cast<std::size_t>(p)].held))
      if (g.macro == *current_) goals.push_back(std::move(g));
    const Choice c = choose_goal(s, pref, goals, reach);
    if (c.goal.macro != *current_) {
      current_.reset();
      return PrimitiveAction::stay;
    }
    return step_toward_goal(s, p, c.goal, pref.style, seed);
  }

  /// Marks the macro complete when the player produced a matching event.
  void observe(const std::vector<Event>& events, int p) {
    if (!current_) return;
    for (const Event& e : events) {
      if (e.player != p) continue;
      const auto m = macro_for_event(e);
      if ((m && *m == *current_) || (*current_ == MacroAction::trash && e.kind == EventKind::pickup_burnt)) {
        current_.reset();
        return;
      }
    }
  }

 private:
  std::optional<MacroAction> current_;
  int ticks_ = 0;
};

}  // namespace talents::partners
