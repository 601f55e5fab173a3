#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "talents/core/hash.hpp"
#include "talents/core/rng.hpp"
#include "talents/kitchen/layout.hpp"
#include "talents/kitchen/types.hpp"

namespace talents::kitchen {

enum class EventKind : std::uint8_t {
  pickup_ingredient,
  pickup_plate,
  counter_place,
  counter_pick,
  load_station,
  cooking_started,
  dish_ready,
  plate_dish,
  deliver,
  deliver_unmatched,
  station_burnt,
  pickup_burnt,
  trash,
  order_spawned,
  order_expired,
  illegal_interact,
};

inline constexpr std::array<std::string_view, 16> kEventNames = {
    "pickup_ingredient", "pickup_plate",      "counter_place", "counter_pick",  "load_station",
    "cooking_started",   "dish_ready",        "plate_dish",    "deliver",       "deliver_unmatched",
    "station_burnt",     "pickup_burnt",      "trash",         "order_spawned", "order_expired",
    "illegal_interact"};

inline std::string_view to_string(EventKind k) { return kEventNames[static_cast<int>(k)]; }

/// One thing that happened during a tick. player is -1 for environment events.
struct Event {
  int tick = 0;
  int player = -1;
  EventKind kind = EventKind::illegal_interact;
  Coord where;
  Item item = Item::none;
  int value = 0;  // reward for deliveries, order id for order events, station index for station events
  friend bool operator==(const Event&, const Event&) = default;
};

using JointAction = std::array<PrimitiveAction, 2>;

struct GameState {
  LayoutPtr layout;
  std::array<PlayerState, 2> players{};
  std::vector<StationState> stations;
  std::vector<Order> orders;
  std::vector<Item> counter_items;  // per tile; only counter tiles ever hold items
  int tick = 0;
  int score = 0;
  int episode_length = 400;
  std::uint64_t rng_seed = 0;
  std::uint64_t rng_state = 0;
  int next_order_id = 0;
  int next_order_tick = 0;
  int deliveries = 0;
  int expirations = 0;

  bool terminal() const { return tick >= episode_length; }
  Item counter_item(Coord c) const { return counter_items[static_cast<std::size_t>(layout->index(c))]; }
  int other(int p) const { return 1 - p; }
};

inline bool operator==(const GameState& a, const GameState& b) {
  return a.layout == b.layout && a.players == b.players && a.stations == b.stations && a.orders == b.orders &&
         a.counter_items == b.counter_items && a.tick == b.tick && a.score == b.score &&
         a.episode_length == b.episode_length && a.rng_seed == b.rng_seed && a.rng_state == b.rng_state &&
         a.next_order_id == b.next_order_id && a.next_order_tick == b.next_order_tick &&
         a.deliveries == b.deliveries && a.expirations == b.expirations;
}

struct StepResult {
  GameState state;
  std::array<int, 2> reward{};
  std::vector<Event> events;
};

namespace detail {

inline void spawn_order(GameState& s, std::vector<Event>* events) {
  const auto& sched = s.layout->orders;
  Order o;
  o.id = s.next_order_id++;
  o.recipe = unit_double(splitmix64(s.rng_state)) < sched.soup_share ? Recipe::soup : Recipe::rice_dish;
  o.duration = sched.duration;
  o.time_remaining = sched.duration;
  o.bonus_window = sched.bonus_window;
  o.base_reward = sched.base_reward;
  o.bonus_reward = sched.bonus_reward;
  s.orders.push_back(o);
  if (events) events->push_back({s.tick, -1, EventKind::order_spawned, {}, Item::none, o.id});
}

}  // namespace detail

/// Initial state of a parsed layout. episode_length <= 0 uses the layout default.
inline GameState initial_state(LayoutPtr layout, std::uint64_t seed, int episode_length = 0) {
  GameState s;
  s.layout = std::move(layout);
  const Layout& L = *s.layout;
  s.episode_length = episode_length > 0 ? episode_length : L.episode_ticks;
  s.rng_seed = seed;
  s.rng_state = seed;
  for (int p = 0; p < 2; ++p) {
    s.players[static_cast<std::size_t>(p)].position = L.starts[static_cast<std::size_t>(p)];
    s.players[static_cast<std::size_t>(p)].orientation = Orientation::north;
  }
  for (const auto& spec : L.stations) {
    StationState st;
    st.kind = spec.kind;
    st.position = spec.position;
    s.stations.push_back(st);
  }
  s.counter_items.assign(static_cast<std::size_t>(L.width * L.height), Item::none);
  for (int i = 0; i < L.orders.initial; ++i) detail::spawn_order(s, nullptr);
  s.next_order_tick = L.orders.interval;
  return s;
}

/// Initial state of a built-in layout; throws ConfigError for unknown ids.
inline GameState load_layout(std::string_view name, std::uint64_t seed = 0, int episode_length = 0) {
  return initial_state(builtin_layout(name), seed, episode_length);
}

namespace detail {

inline void interact(GameState& s, int p, std::vector<Event>& events, std::array<int, 2>& reward) {
  auto& pl = s.players[static_cast<std::size_t>(p)];
  const Layout& L = *s.layout;
  const Coord target = step_toward(pl.position, pl.orientation);
  auto illegal = [&] { events.push_back({s.tick, p, EventKind::illegal_interact, target, pl.held, 0}); };
  if (!L.in_bounds(target)) return illegal();
  const Tile& tile = L.at(target);
  switch (tile.kind) {
    case TileKind::floor: return illegal();
    case TileKind::ingredient_source:
      if (pl.held != Item::none) return illegal();
      pl.held = ingredient_item(tile.ingredient);
      events.push_back({s.tick, p, EventKind::pickup_ingredient, target, pl.held, 0});
      return;
    case TileKind::plate_stack:
      if (pl.held != Item::none) return illegal();
      pl.held = Item::plate;
      events.push_back({s.tick, p, EventKind::pickup_plate, target, pl.held, 0});
      return;
    case TileKind::counter: {
      auto& slot = s.counter_items[static_cast<std::size_t>(L.index(target))];
      if (pl.held != Item::none && slot == Item::none) {
        slot = pl.held;
        pl.held = Item::none;
        events.push_back({s.tick, p, EventKind::counter_place, target, slot, 0});
      } else if (pl.held == Item::none && slot != Item::none) {
        pl.held = slot;
        slot = Item::none;
        events.push_back({s.tick, p, EventKind::counter_pick, target, pl.held, 0});
      } else {
        illegal();
      }
      return;
    }
    case TileKind::trash:
      if (pl.held == Item::none) return illegal();
      events.push_back({s.tick, p, EventKind::trash, target, pl.held, 0});
      pl.held = Item::none;
      return;
    case TileKind::delivery_window: {
      if (!is_dish(pl.held)) return illegal();
      const Recipe r = dish_recipe(pl.held);
      // Earliest-spawned matching order is served first.
      auto it = std::find_if(s.orders.begin(), s.orders.end(), [&](const Order& o) { return o.recipe == r; });
      if (it == s.orders.end()) {
        events.push_back({s.tick, p, EventKind::deliver_unmatched, target, pl.held, 0});
      } else {
        const int value = it->base_reward + (it->in_bonus_window() ? it->bonus_reward : 0);
        reward[0] += value;
        reward[1] += value;
        s.score += value;
        ++s.deliveries;
        events.push_back({s.tick, p, EventKind::deliver, target, pl.held, value});
        s.orders.erase(it);
      }
      pl.held = Item::none;
      return;
    }
    case TileKind::station_slot: {
      auto& st = s.stations[static_cast<std::size_t>(tile.station)];
      const Item want = ingredient_item(station_ingredient(st.kind));
      if (pl.held == want && st.phase == StationPhase::idle && st.loaded() < station_capacity(st.kind)) {
        ++st.contents[static_cast<std::size_t>(station_ingredient(st.kind))];
        events.push_back({s.tick, p, EventKind::load_station, target, pl.held, tile.station});
        pl.held = Item::none;
        if (st.loaded() == station_capacity(st.kind)) {
          st.phase = StationPhase::cooking;
          st.cook_timer = L.cook_ticks[static_cast<std::size_t>(st.kind)];
          events.push_back({s.tick, -1, EventKind::cooking_started, target, Item::none, tile.station});
        }
        return;
      }
      if (st.phase == StationPhase::ready && is_plate_like(pl.held)) {
        Item out = Item::none;
        switch (st.kind) {
          case StationKind::pot:
            if (pl.held == Item::plate) out = Item::soup_dish;
            break;
          case StationKind::rice_cooker:
            if (pl.held == Item::plate) out = Item::plate_rice;
            else if (pl.held == Item::plate_protein) out = Item::rice_dish;
            break;
          case StationKind::grill:
            if (pl.held == Item::plate) out = Item::plate_protein;
            else if (pl.held == Item::plate_rice) out = Item::rice_dish;
            break;
        }
        if (out == Item::none) return illegal();
        pl.held = out;
        st.contents = {};
        st.phase = StationPhase::idle;
        st.cook_timer = 0;
        events.push_back({s.tick, p, EventKind::plate_dish, target, out, tile.station});
        return;
      }
      if (st.phase == StationPhase::burnt && pl.held == Item::none) {
        pl.held = st.kind == StationKind::pot ? Item::burnt_soup : Item::burnt;
        st.contents = {};
        st.phase = StationPhase::idle;
        st.cook_timer = 0;
        events.push_back({s.tick, p, EventKind::pickup_burnt, target, pl.held, tile.station});
        return;
      }
      return illegal();
    }
  }
}

}  // namespace detail

/// Advances one tick. Movement is resolved simultaneously (swaps forbidden,
/// contested tile goes to the lower player index), then interacts in player
/// order, then timers, expiry, burning and order spawns. The reward is the
/// shared team reward, identical for both seats.
inline StepResult step(const GameState& in, const JointAction& joint) {
  require(!in.terminal(), "step: state is terminal");
  StepResult r;
  r.state = in;
  GameState& s = r.state;
  const Layout& L = *s.layout;

  std::array<Coord, 2> cur{s.players[0].position, s.players[1].position};
  std::array<Coord, 2> prop = cur;
  for (int p = 0; p < 2; ++p) {
    if (auto o = move_orientation(joint[static_cast<std::size_t>(p)])) {
      auto& pl = s.players[static_cast<std::size_t>(p)];
      pl.orientation = *o;
      const Coord t = step_toward(pl.position, *o);
      if (L.walkable(t)) prop[static_cast<std::size_t>(p)] = t;
    }
  }
  if (prop[0] == cur[1] && prop[1] == cur[0]) {
    prop = cur;  // swap-through forbidden
  }
  // Resolve contested targets and moves into a tile whose occupant stays.
  for (int iter = 0; iter < 3; ++iter) {
    if (prop[0] == prop[1]) {
      if (prop[0] == cur[0]) prop[1] = cur[1];
      else if (prop[1] == cur[1]) prop[0] = cur[0];
      else prop[1] = cur[1];  // lower index wins
    }
  }
  s.players[0].position = prop[0];
  s.players[1].position = prop[1];

  for (int p = 0; p < 2; ++p)
    if (joint[static_cast<std::size_t>(p)] == PrimitiveAction::interact) detail::interact(s, p, r.events, r.reward);

  for (std::size_t i = 0; i < s.stations.size(); ++i) {
    auto& st = s.stations[i];
    if (st.phase == StationPhase::cooking) {
      if (--st.cook_timer <= 0) {
        st.phase = StationPhase::ready;
        st.cook_timer = L.burn_window;
        r.events.push_back({s.tick, -1, EventKind::dish_ready, st.position, Item::none, static_cast<int>(i)});
      }
    } else if (st.phase == StationPhase::ready) {
      if (--st.cook_timer <= 0) {
        st.phase = StationPhase::burnt;
        st.cook_timer = 0;
        r.events.push_back({s.tick, -1, EventKind::station_burnt, st.position, Item::none, static_cast<int>(i)});
      }
    }
  }

  for (auto& o : s.orders) --o.time_remaining;
  for (auto it = s.orders.begin(); it != s.orders.end();) {
    if (it->time_remaining <= 0) {
      r.events.push_back({s.tick, -1, EventKind::order_expired, {}, Item::none, it->id});
      ++s.expirations;
      it = s.orders.erase(it);
    } else {
      ++it;
    }
  }

  if (s.tick + 1 >= s.next_order_tick) {
    if (static_cast<int>(s.orders.size()) < L.orders.max_concurrent) detail::spawn_order(s, &r.events);
    s.next_order_tick += L.orders.interval;
  }
  ++s.tick;
  return r;
}

/// Digest of the dynamic state; equal digests across replays are the
/// determinism check used by tests and the replay tools.
inline std::uint64_t state_digest(const GameState& s) {
  Fnv1a h;
  h.pod(s.layout->version).pod(s.tick).pod(s.score).pod(s.rng_state).pod(s.next_order_id).pod(s.next_order_tick);
  for (const auto& p : s.players) h.pod(p.position.x).pod(p.position.y).pod(p.orientation).pod(p.held);
  for (const auto& st : s.stations)
    h.pod(st.kind).pod(st.contents).pod(st.cook_timer).pod(st.phase);
  for (const auto& o : s.orders) h.pod(o.id).pod(o.recipe).pod(o.time_remaining);
  for (auto i : s.counter_items) h.pod(i);
  return h.value();
}

/// Ingredient-unit mass of an item: plates and ingredients count one each,
/// composite items count their parts.
inline int item_units(Item i) {
  switch (i) {
    case Item::none: return 0;
    case Item::onion:
    case Item::rice:
    case Item::protein:
    case Item::plate: return 1;
    case Item::plate_rice:
    case Item::plate_protein: return 2;
    case Item::soup_dish: return 4;
    case Item::rice_dish: return 3;
    case Item::burnt: return 1;
    case Item::burnt_soup: return 3;
  }
  return 0;
}

/// Total ingredient-unit mass in play: held, stationed and on counters. It
/// changes only through source pickups, deliveries and trash events.
inline int item_mass(const GameState& s) {
  int m = 0;
  for (const auto& p : s.players) m += item_units(p.held);
  for (const auto& st : s.stations) m += st.loaded();
  for (auto i : s.counter_items) m += item_units(i);
  return m;
}

}  // namespace talents::kitchen
