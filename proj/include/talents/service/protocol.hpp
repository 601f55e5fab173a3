#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "talents/kitchen/env.hpp"

// Wire protocol version 1. Every message is one JSON text frame with a "v"
// and a "type" field; docs/protocol.md lists the fields.
namespace talents::service {

using json = nlohmann::json;
using kitchen::GameState;
using kitchen::PrimitiveAction;

inline constexpr int kProtocolVersion = 1;

/// Request the server refuses; the reason goes back to the caller verbatim.
class Rejected : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ClientKind { join, input, leave, resync };

struct ClientMessage {
  ClientKind kind = ClientKind::join;
  PrimitiveAction action = PrimitiveAction::stay;  // input only
};

inline ClientMessage parse_client_message(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception&) {
    throw Rejected("message is not valid JSON");
  }
  if (!j.is_object()) throw Rejected("message must be a JSON object");
  if (j.value("v", -1) != kProtocolVersion) throw Rejected("unsupported protocol version (expected 1)");
  const std::string type = j.value("type", "");
  ClientMessage m;
  if (type == "join") {
    m.kind = ClientKind::join;
  } else if (type == "leave") {
    m.kind = ClientKind::leave;
  } else if (type == "resync") {
    m.kind = ClientKind::resync;
  } else if (type == "input") {
    m.kind = ClientKind::input;
    const auto a = kitchen::parse_primitive(j.value("action", ""));
    if (!a) throw Rejected("unknown action '" + j.value("action", "") + "'");
    m.action = *a;
  } else {
    throw Rejected("unknown message type '" + type + "'");
  }
  return m;
}

inline json client_message(ClientKind k, PrimitiveAction a = PrimitiveAction::stay) {
  static constexpr const char* names[] = {"join", "input", "leave", "resync"};
  json j = {{"v", kProtocolVersion}, {"type", names[static_cast<int>(k)]}};
  if (k == ClientKind::input) j["action"] = std::string(kitchen::to_string(a));
  return j;
}

inline json coord_json(kitchen::Coord c) { return {c.x, c.y}; }

inline constexpr const char* kFacingNames[] = {"north", "south", "east", "west"};

/// One character per tile, in the layout file alphabet.
inline std::vector<std::string> grid_rows(const kitchen::Layout& L) {
  using kitchen::TileKind;
  std::vector<std::string> rows;
  for (int y = 0; y < L.height; ++y) {
    std::string r;
    for (int x = 0; x < L.width; ++x) {
      const auto& t = L.at({x, y});
      switch (t.kind) {
        case TileKind::floor: r += ' '; break;
        case TileKind::ingredient_source: r += "ORM"[static_cast<int>(t.ingredient)]; break;
        case TileKind::plate_stack: r += 'D'; break;
        case TileKind::delivery_window: r += 'S'; break;
        case TileKind::trash: r += 'T'; break;
        case TileKind::station_slot: r += "PCG"[static_cast<int>(L.stations[static_cast<std::size_t>(t.station)].kind)]; break;
        default: r += 'X';
      }
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

inline json player_json(const kitchen::PlayerState& p) {
  return {{"pos", coord_json(p.position)},
          {"facing", kFacingNames[static_cast<int>(p.orientation)]},
          {"held", std::string(kitchen::to_string(p.held))}};
}

inline json station_json(const kitchen::StationState& s) {
  return {{"kind", std::string(kitchen::kStationNames[static_cast<std::size_t>(s.kind)])},
          {"pos", coord_json(s.position)},
          {"contents", s.contents},
          {"phase", std::string(kitchen::kPhaseNames[static_cast<int>(s.phase)])},
          {"timer", s.cook_timer}};
}

inline json order_json(const kitchen::Order& o) {
  return {{"id", o.id},
          {"recipe", std::string(kitchen::kRecipeNames[static_cast<std::size_t>(o.recipe)])},
          {"time_remaining", o.time_remaining},
          {"duration", o.duration},
          {"bonus", o.in_bonus_window()}};
}

inline json orders_json(const GameState& s) {
  json out = json::array();
  for (const auto& o : s.orders) out.push_back(order_json(o));
  return out;
}

/// Counter items as {index: item} for non-empty tiles.
inline json counters_json(const GameState& s) {
  json out = json::object();
  for (std::size_t i = 0; i < s.counter_items.size(); ++i)
    if (s.counter_items[i] != kitchen::Item::none) out[std::to_string(i)] = std::string(kitchen::to_string(s.counter_items[i]));
  return out;
}

/// Full view of a state: the static grid plus everything that changes.
inline json full_state(const GameState& s) {
  const auto& L = *s.layout;
  json st = json::array();
  for (const auto& x : s.stations) st.push_back(station_json(x));
  return {{"layout", L.name},
          {"grid", grid_rows(L)},
          {"players", {player_json(s.players[0]), player_json(s.players[1])}},
          {"stations", st},
          {"counters", counters_json(s)},
          {"orders", orders_json(s)}};
}

/// Changes from `prev` to `cur`. Players are always included; stations and
/// counters only where they differ (counter entries of "none" mean cleared);
/// orders whenever the list changed.
inline json state_delta(const GameState& prev, const GameState& cur) {
  json d = {{"players", {player_json(cur.players[0]), player_json(cur.players[1])}}};
  json st = json::object();
  for (std::size_t i = 0; i < cur.stations.size(); ++i)
    if (!(cur.stations[i] == prev.stations[i])) st[std::to_string(i)] = station_json(cur.stations[i]);
  if (!st.empty()) d["stations"] = st;
  json ct = json::object();
  for (std::size_t i = 0; i < cur.counter_items.size(); ++i)
    if (cur.counter_items[i] != prev.counter_items[i]) ct[std::to_string(i)] = std::string(kitchen::to_string(cur.counter_items[i]));
  if (!ct.empty()) d["counters"] = ct;
  if (!(cur.orders == prev.orders)) d["orders"] = orders_json(cur);
  return d;
}

/// Server snapshot. `delta` is either a state_delta (full = false) or a
/// full_state (full = true).
inline json snapshot_message(const std::string& session, const GameState& s, json delta, bool full, int tick_ms,
                             const std::optional<std::vector<double>>& belief) {
  json j = {{"v", kProtocolVersion},
            {"type", "snapshot"},
            {"session", session},
            {"tick", s.tick},
            {"full", full},
            {"delta", std::move(delta)},
            {"score", s.score},
            {"time_left_ms", static_cast<long>(s.episode_length - s.tick) * tick_ms}};
  if (belief) j["belief"] = *belief;
  return j;
}

inline json error_message(const std::string& reason) {
  return {{"v", kProtocolVersion}, {"type", "error"}, {"reason", reason}};
}

inline json ack_message(int tick) { return {{"v", kProtocolVersion}, {"type", "ack"}, {"tick", tick}}; }

}  // namespace talents::service
