#pragma once

#include <array>
#include <cstdio>
#include <string>
#include <vector>

#include "talents/core/error.hpp"
#include "talents/core/rng.hpp"
#include "talents/partners/agent.hpp"

namespace talents::partners {

/// Which part of the kitchen a partner archetype concentrates on.
enum class Emphasis : std::uint8_t { soup, rice_grill, service };
inline constexpr int kNumEmphases = 3;
inline constexpr std::array<std::string_view, kNumEmphases> kEmphasisNames = {"soup", "rice_grill", "service"};

/// Stratification grid: emphasis x style x variant.
inline constexpr int kNumVariants = 4;
inline constexpr int kPopulationGridSize = kNumEmphases * 2 * kNumVariants;

/// Checkpoint emulation: path-noise levels standing in for early, middle and
/// final training checkpoints.
inline constexpr std::array<double, 3> kCheckpointNoise = {0.0, 0.1, 0.3};

/// Base shaping weights of an archetype (before variant and jitter).
inline ShapingWeights archetype_weights(Emphasis e) {
  //               onion rice  grill dish  plate deliv idle  bonus
  switch (e) {
    case Emphasis::soup: return {1.0, 0.0, 0.0, 0.3, 0.8, 0.8, 0.8, 0.0};
    case Emphasis::rice_grill: return {0.0, 1.0, 1.0, 0.3, 0.8, 0.8, 0.8, 0.0};
    default: return {0.05, 0.05, 0.05, 1.0, 1.0, 1.0, 0.8, 0.0};
  }
}

struct PopulationMember {
  ScriptedPolicy policy;
  Emphasis emphasis;
  int variant = 0;
};

inline std::string policy_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "bp%02d", index);
  return buf;
}

/// Behavior preference for one grid cell. Variants shift the secondary terms
/// (idle tolerance, bonus seeking, plate duty); the seed adds a small jitter
/// so every member has a distinct weight vector.
inline BehaviorPreference make_preference(Emphasis e, Style style, int variant, std::uint64_t seed) {
  BehaviorPreference p;
  p.weights = archetype_weights(e);
  auto& w = p.weights;
  static constexpr std::array<double, kNumVariants> idle = {0.9, 0.5, 1.0, 0.2};
  static constexpr std::array<double, kNumVariants> bonus = {0.0, 1.0, 0.5, 0.25};
  static constexpr std::array<double, kNumVariants> dish = {0.0, 0.2, -0.2, 0.1};
  w[static_cast<std::size_t>(Shaping::idle_penalty)] = idle[static_cast<std::size_t>(variant)];
  w[static_cast<std::size_t>(Shaping::bonus_seeking)] = bonus[static_cast<std::size_t>(variant)];
  w[static_cast<std::size_t>(Shaping::dishwashing)] += dish[static_cast<std::size_t>(variant)];
  Rng rng(seed);
  for (auto& v : w)
    if (v > 0.0) v += 0.05 * (rng.uniform() - 0.5);
  p.style = style;
  p.seed = derive_seed(seed, 0x51);
  return p;
}

/// n scripted partners over the stratified grid. Member i takes emphasis
/// i mod 3, style (i / 3) mod 2 and variant i / 6, so every prefix of the
/// grid is balanced across emphases.
inline std::vector<PopulationMember> make_population(int n, std::uint64_t seed) {
  if (n < 2) throw ConfigError("population size must be at least 2");
  if (n > kPopulationGridSize)
    throw ConfigError("population size " + std::to_string(n) + " exceeds the stratification grid (" +
                      std::to_string(kPopulationGridSize) + ")");
  std::vector<PopulationMember> out;
  for (int i = 0; i < n; ++i) {
    const auto e = static_cast<Emphasis>(i % kNumEmphases);
    const auto style = static_cast<Style>((i / kNumEmphases) % 2);
    const int variant = i / (kNumEmphases * 2);
    out.push_back({ScriptedPolicy(policy_id(i), make_preference(e, style, variant, derive_seed(seed, static_cast<std::uint64_t>(i)))), e,
                   variant});
  }
  return out;
}

inline constexpr const char* kReferenceId = "ref";

/// Neutral scripted filler used as the fixed co-player when recording
/// strategy data; not a population member.
inline ScriptedPolicy reference_partner() { return ScriptedPolicy(kReferenceId, neutral_preference()); }

/// True when the member's weights favour work at a station of kind `k`.
inline bool emphasizes(const BehaviorPreference& p, StationKind k) {
  const Shaping term = k == StationKind::pot ? Shaping::onion_pickup
                       : k == StationKind::rice_cooker ? Shaping::rice_boiling
                                                       : Shaping::grilling;
  return p.w(term) >= 0.5;
}

}  // namespace talents::partners
