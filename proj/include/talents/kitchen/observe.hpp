#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "talents/kitchen/env.hpp"
#include "talents/kitchen/pathing.hpp"

namespace talents::kitchen {

using ObservationVec = std::vector<double>;

/// Fixed landmark categories used by the observation and by the planners.
enum class Landmark : std::uint8_t {
  onion_source,
  rice_source,
  protein_source,
  plate_stack,
  pot,
  rice_cooker,
  grill,
  delivery,
  trash,
};
inline constexpr int kNumLandmarks = 9;

inline std::vector<Coord> landmark_tiles(const Layout& L, Landmark lm) {
  std::vector<Coord> out;
  for (int y = 0; y < L.height; ++y) {
    for (int x = 0; x < L.width; ++x) {
      const Tile& t = L.at({x, y});
      bool hit = false;
      switch (lm) {
        case Landmark::onion_source:
          hit = t.kind == TileKind::ingredient_source && t.ingredient == Ingredient::onion;
          break;
        case Landmark::rice_source:
          hit = t.kind == TileKind::ingredient_source && t.ingredient == Ingredient::rice;
          break;
        case Landmark::protein_source:
          hit = t.kind == TileKind::ingredient_source && t.ingredient == Ingredient::protein;
          break;
        case Landmark::plate_stack: hit = t.kind == TileKind::plate_stack; break;
        case Landmark::pot:
        case Landmark::rice_cooker:
        case Landmark::grill: {
          const auto want = static_cast<StationKind>(static_cast<int>(lm) - static_cast<int>(Landmark::pot));
          hit = t.kind == TileKind::station_slot && L.stations[static_cast<std::size_t>(t.station)].kind == want;
          break;
        }
        case Landmark::delivery: hit = t.kind == TileKind::delivery_window; break;
        case Landmark::trash: hit = t.kind == TileKind::trash; break;
      }
      if (hit) out.push_back({x, y});
    }
  }
  return out;
}

/// Per-layout static navigation: for each landmark, the BFS distance from
/// every floor cell to the nearest interaction position.
struct LandmarkFields {
  std::array<std::vector<Coord>, kNumLandmarks> tiles;
  std::array<std::vector<int>, kNumLandmarks> dist;
};

inline std::shared_ptr<const LandmarkFields> landmark_fields(const Layout& L) {
  static std::mutex mu;
  static std::map<std::uint64_t, std::shared_ptr<const LandmarkFields>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[L.version];
  if (!slot) {
    auto f = std::make_shared<LandmarkFields>();
    for (int i = 0; i < kNumLandmarks; ++i) {
      f->tiles[static_cast<std::size_t>(i)] = landmark_tiles(L, static_cast<Landmark>(i));
      std::vector<Coord> sources;
      for (Coord t : f->tiles[static_cast<std::size_t>(i)])
        for (Coord a : access_cells(L, t)) sources.push_back(a);
      f->dist[static_cast<std::size_t>(i)] = distance_field(L, sources);
    }
    slot = std::move(f);
  }
  return slot;
}

// Observation layout (all features in [-1, 1]):
//   [0,6)    own pose: x, y, orientation one-hot
//   [6,12)   partner pose: x, y, orientation one-hot
//   [12,23)  own held item one-hot
//   [23,34)  partner held item one-hot
//   [34,36)  partner delta (dx / width, dy / height)
//   [36,54)  stations pot, rice_cooker, grill: phase one-hot(4), timer, fill
//   [54,74)  order slots x4: present, soup, rice_dish, urgency, bonus active
//   [74,146) landmarks x9: dx, dy, distance, route hint one-hot(N, S, E, W, interact)
//   [146,162) nearest empty counter, nearest occupied counter (same 8 features)
//   [162,164) pending soup / rice_dish order share
//   [164]    episode progress
namespace obs {
inline constexpr int kOwnPose = 0;
inline constexpr int kPartnerPose = 6;
inline constexpr int kPoseSize = 6;
inline constexpr int kOwnHeld = 12;
inline constexpr int kPartnerHeld = 23;
inline constexpr int kPartnerDelta = 34;
inline constexpr int kStations = 36;
inline constexpr int kOrders = 54;
inline constexpr int kLandmarks = 74;
inline constexpr int kLandmarkSize = 8;
inline constexpr int kCounters = 146;
inline constexpr int kDemand = 162;
inline constexpr int kProgress = 164;
inline constexpr int kSize = 165;
inline constexpr int kOrderSlots = 4;
}  // namespace obs

inline constexpr int kObservationSize = obs::kSize;

namespace detail {

inline double scale_coord(int v, int extent) {
  return extent <= 1 ? 0.0 : 2.0 * v / (extent - 1) - 1.0;
}

/// Next primitive toward the field's zero set, or interact when already facing
/// a target tile. Returns index 0..4 into (N, S, E, W, interact), or -1.
inline int route_hint(const Layout& L, const PlayerState& me, const std::vector<int>& dist,
                      const std::vector<Coord>& targets) {
  const int d = dist[static_cast<std::size_t>(L.index(me.position))];
  if (d >= kUnreachable) return -1;
  if (d == 0) {
    std::optional<Coord> best;
    for (Coord t : targets)
      if (auto f = facing_to(me.position, t); f && (!best || t < *best)) best = t;
    if (!best) return -1;
    const Orientation want = *facing_to(me.position, *best);
    if (want == me.orientation) return 4;
    return static_cast<int>(want);
  }
  for (Orientation o : kNeighbourOrder) {
    const Coord n = step_toward(me.position, o);
    if (L.walkable(n) && dist[static_cast<std::size_t>(L.index(n))] == d - 1) return static_cast<int>(o);
  }
  return -1;
}

inline void write_target(double* out, const Layout& L, const PlayerState& me, const std::vector<int>& dist,
                         const std::vector<Coord>& targets) {
  const int d = dist[static_cast<std::size_t>(L.index(me.position))];
  if (targets.empty() || d >= kUnreachable) {
    out[0] = out[1] = 0.0;
    out[2] = 1.0;  // "far / unavailable"
    return;
  }
  Coord nearest = targets.front();
  int best = kUnreachable;
  for (Coord t : targets) {
    const int md = std::abs(t.x - me.position.x) + std::abs(t.y - me.position.y);
    if (md < best) {
      best = md;
      nearest = t;
    }
  }
  out[0] = static_cast<double>(nearest.x - me.position.x) / L.width;
  out[1] = static_cast<double>(nearest.y - me.position.y) / L.height;
  out[2] = std::min(1.0, 2.0 * d / (L.width + L.height)) * 2.0 - 1.0;
  const int hint = route_hint(L, me, dist, targets);
  if (hint >= 0) out[3 + hint] = 1.0;
}

inline void write_pose(double* out, const Layout& L, const PlayerState& p) {
  out[0] = scale_coord(p.position.x, L.width);
  out[1] = scale_coord(p.position.y, L.height);
  out[2 + static_cast<int>(p.orientation)] = 1.0;
}

}  // namespace detail

/// Ego-centric featurization of `state` for `player`. Pure: equal states give
/// bit-identical vectors.
inline ObservationVec observe(const GameState& state, int player) {
  require(player == 0 || player == 1, "observe: player must be 0 or 1");
  const Layout& L = *state.layout;
  ObservationVec v(obs::kSize, 0.0);
  const PlayerState& me = state.players[static_cast<std::size_t>(player)];
  const PlayerState& other = state.players[static_cast<std::size_t>(1 - player)];

  detail::write_pose(&v[obs::kOwnPose], L, me);
  detail::write_pose(&v[obs::kPartnerPose], L, other);
  v[static_cast<std::size_t>(obs::kOwnHeld + static_cast<int>(me.held))] = 1.0;
  v[static_cast<std::size_t>(obs::kPartnerHeld + static_cast<int>(other.held))] = 1.0;
  v[obs::kPartnerDelta] = static_cast<double>(other.position.x - me.position.x) / L.width;
  v[obs::kPartnerDelta + 1] = static_cast<double>(other.position.y - me.position.y) / L.height;

  for (const auto& st : state.stations) {
    const int base = obs::kStations + 6 * static_cast<int>(st.kind);
    v[static_cast<std::size_t>(base + static_cast<int>(st.phase))] = 1.0;
    const int span = st.phase == StationPhase::cooking ? L.cook_ticks[static_cast<std::size_t>(st.kind)]
                                                       : L.burn_window;
    v[static_cast<std::size_t>(base + 4)] = span > 0 ? std::clamp(static_cast<double>(st.cook_timer) / span, 0.0, 1.0) : 0.0;
    v[static_cast<std::size_t>(base + 5)] = static_cast<double>(st.loaded()) / station_capacity(st.kind);
  }

  int soups = 0, rices = 0;
  for (std::size_t i = 0; i < state.orders.size(); ++i) {
    const Order& o = state.orders[i];
    (o.recipe == Recipe::soup ? soups : rices)++;
    if (static_cast<int>(i) >= obs::kOrderSlots) continue;
    const int base = obs::kOrders + 5 * static_cast<int>(i);
    v[static_cast<std::size_t>(base)] = 1.0;
    v[static_cast<std::size_t>(base + 1 + static_cast<int>(o.recipe))] = 1.0;
    v[static_cast<std::size_t>(base + 3)] =
        o.duration > 0 ? std::clamp(static_cast<double>(o.time_remaining) / o.duration, 0.0, 1.0) : 0.0;
    v[static_cast<std::size_t>(base + 4)] = o.in_bonus_window() ? 1.0 : 0.0;
  }
  const double max_orders = std::max(1, L.orders.max_concurrent);
  v[obs::kDemand] = std::min(1.0, soups / max_orders);
  v[obs::kDemand + 1] = std::min(1.0, rices / max_orders);

  const auto fields = landmark_fields(L);
  for (int i = 0; i < kNumLandmarks; ++i)
    detail::write_target(&v[static_cast<std::size_t>(obs::kLandmarks + obs::kLandmarkSize * i)], L, me,
                         fields->dist[static_cast<std::size_t>(i)], fields->tiles[static_cast<std::size_t>(i)]);

  std::vector<Coord> empty_counters, full_counters;
  for (int idx = 0; idx < L.width * L.height; ++idx) {
    const Coord c = L.coord(idx);
    if (L.at(c).kind != TileKind::counter) continue;
    if (access_cells(L, c).empty()) continue;
    (state.counter_items[static_cast<std::size_t>(idx)] == Item::none ? empty_counters : full_counters).push_back(c);
  }
  auto field_for = [&](const std::vector<Coord>& tiles) {
    std::vector<Coord> src;
    for (Coord t : tiles)
      for (Coord a : access_cells(L, t)) src.push_back(a);
    return distance_field(L, src);
  };
  detail::write_target(&v[obs::kCounters], L, me, field_for(empty_counters), empty_counters);
  detail::write_target(&v[obs::kCounters + obs::kLandmarkSize], L, me, field_for(full_counters), full_counters);

  v[obs::kProgress] = state.episode_length > 0 ? 2.0 * state.tick / state.episode_length - 1.0 : 0.0;
  return v;
}

}  // namespace talents::kitchen
