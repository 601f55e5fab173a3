#pragma once

#include <array>
#include <cstdlib>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <tuple>
#include <vector>

#include "talents/kitchen/layout.hpp"
#include "talents/kitchen/types.hpp"

namespace talents::kitchen {

inline constexpr int kUnreachable = std::numeric_limits<int>::max() / 4;

// Neighbour order is "lowest coordinate first" (north, west, east, south) so
// every tie below resolves toward the smaller (y, x).
inline constexpr std::array<Orientation, 4> kNeighbourOrder = {Orientation::north, Orientation::west,
                                                               Orientation::east, Orientation::south};

/// Multi-source BFS over floor tiles. blocked(c) may exclude extra cells
/// (e.g. the partner's position).
inline std::vector<int> distance_field(const Layout& L, const std::vector<Coord>& sources,
                                       const std::function<bool(Coord)>& blocked = {}) {
  std::vector<int> dist(static_cast<std::size_t>(L.width * L.height), kUnreachable);
  std::deque<Coord> q;
  for (Coord s : sources) {
    if (!L.walkable(s) || (blocked && blocked(s))) continue;
    auto& d = dist[static_cast<std::size_t>(L.index(s))];
    if (d != 0) {
      d = 0;
      q.push_back(s);
    }
  }
  while (!q.empty()) {
    const Coord c = q.front();
    q.pop_front();
    const int dc = dist[static_cast<std::size_t>(L.index(c))];
    for (Orientation o : kNeighbourOrder) {
      const Coord n = step_toward(c, o);
      if (!L.walkable(n) || (blocked && blocked(n))) continue;
      auto& dn = dist[static_cast<std::size_t>(L.index(n))];
      if (dn > dc + 1) {
        dn = dc + 1;
        q.push_back(n);
      }
    }
  }
  return dist;
}

/// Floor cells from which `target` (a non-floor tile) can be interacted with.
inline std::vector<Coord> access_cells(const Layout& L, Coord target) {
  std::vector<Coord> out;
  for (Orientation o : kNeighbourOrder) {
    const Coord n = step_toward(target, o);
    if (L.walkable(n)) out.push_back(n);
  }
  return out;
}

/// Orientation a player at `from` must face to interact with adjacent `target`.
inline std::optional<Orientation> facing_to(Coord from, Coord target) {
  for (Orientation o : kNeighbourOrder)
    if (step_toward(from, o) == target) return o;
  return std::nullopt;
}

struct PathStep {
  PrimitiveAction action = PrimitiveAction::stay;
  int distance = kUnreachable;  // moves until an interaction position is reached
  Coord target{-1, -1};         // chosen target tile
  bool found() const { return distance < kUnreachable; }
};

/// A* toward the nearest interaction position of any tile in `targets`.
/// Returns the next primitive: a move along the path, a turn to face the
/// target, or interact once facing it. Ties (equal path length) resolve to
/// the lowest target coordinate.
inline PathStep astar_step(const Layout& L, const PlayerState& me, const std::vector<Coord>& targets,
                           const std::function<bool(Coord)>& blocked = {}) {
  PathStep best;
  if (targets.empty()) return best;

  // Interaction-ready cells and which target each serves.
  struct Goal {
    Coord cell;
    Coord target;
  };
  std::vector<Goal> goals;
  for (Coord t : targets)
    for (Coord a : access_cells(L, t))
      if (!(blocked && blocked(a)) || a == me.position) goals.push_back({a, t});
  if (goals.empty()) return best;

  // Already adjacent: prefer the lowest-coordinate target reachable without moving.
  {
    std::optional<Coord> here;
    for (const auto& g : goals)
      if (g.cell == me.position && (!here || g.target < *here)) here = g.target;
    if (here) {
      best.distance = 0;
      best.target = *here;
      const auto face = facing_to(me.position, *here);
      best.action = (face && *face == me.orientation) ? PrimitiveAction::interact : move_action(*face);
      return best;
    }
  }

  auto heuristic = [&](Coord c) {
    int h = kUnreachable;
    for (const auto& g : goals) h = std::min(h, std::abs(g.cell.x - c.x) + std::abs(g.cell.y - c.y));
    return h;
  };
  const int n = L.width * L.height;
  std::vector<int> gcost(static_cast<std::size_t>(n), kUnreachable);
  std::vector<int> first(static_cast<std::size_t>(n), -1);  // first move orientation from start
  using Entry = std::tuple<int, int, int>;                   // f, cell index, g
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  const int start = L.index(me.position);
  gcost[static_cast<std::size_t>(start)] = 0;
  open.emplace(heuristic(me.position), start, 0);
  int reached = -1;
  while (!open.empty()) {
    auto [f, idx, g] = open.top();
    open.pop();
    if (g > gcost[static_cast<std::size_t>(idx)]) continue;
    const Coord c = L.coord(idx);
    bool is_goal = false;
    for (const auto& goal : goals) is_goal = is_goal || goal.cell == c;
    if (is_goal && idx != start) {
      reached = idx;
      break;
    }
    for (Orientation o : kNeighbourOrder) {
      const Coord nb = step_toward(c, o);
      if (!L.walkable(nb) || (blocked && blocked(nb))) continue;
      const int ni = L.index(nb);
      if (g + 1 < gcost[static_cast<std::size_t>(ni)]) {
        gcost[static_cast<std::size_t>(ni)] = g + 1;
        first[static_cast<std::size_t>(ni)] = idx == start ? static_cast<int>(o) : first[static_cast<std::size_t>(idx)];
        open.emplace(g + 1 + heuristic(nb), ni, g + 1);
      }
    }
  }
  if (reached < 0) return best;
  // The popped goal is optimal; choose the lowest-coordinate target among goals at that cell.
  const Coord rc = L.coord(reached);
  std::optional<Coord> tgt;
  for (const auto& g : goals)
    if (g.cell == rc && (!tgt || g.target < *tgt)) tgt = g.target;
  best.distance = gcost[static_cast<std::size_t>(reached)];
  best.target = *tgt;
  best.action = move_action(static_cast<Orientation>(first[static_cast<std::size_t>(reached)]));
  return best;
}

}  // namespace talents::kitchen
