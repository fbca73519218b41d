#pragma once

#include <array>
#include <optional>
#include <span>

#include "sguide/backbone.hpp"
#include "sguide/grid.hpp"
#include "sguide/prompt.hpp"

namespace sguide {

// Normalised image coordinates in [0,1], origin top-left, y grows downward.
struct Centroid {
  double x = 0.5;
  double y = 0.5;
};

// Cell-centre coordinates: x_w = (w - 0.5) / W for 1-based w.
double cell_center(int zero_based_index, int cells);

// Attention-weighted mean position. Throws std::invalid_argument unless map
// is a distribution grid.
Centroid centroid(const ScalarGrid& map);

// Attention-weighted mean squared distance from c, in normalised units^2.
double variance(const ScalarGrid& map, const Centroid& c);

// Signed centroid difference along the relation's axis; positive when the
// relation holds. Near uses |x_A - x_B|.
double relation_delta(const Centroid& a, const Centroid& b, Relation relation);

struct LayerStats {
  Centroid centroid;
  double variance = 0.0;
};

// Centroid and variance for each requested (level, layer).
struct TokenStats {
  std::array<std::array<std::optional<LayerStats>, kLayersPerLevel>, 3> entries;

  bool has(Level level) const;
  const LayerStats& at(Level level, int layer) const;
  std::size_t count() const;
};

TokenStats stats_for_token(const AttentionStack& stack, Token token,
                           std::span<const Level> levels);

}  // namespace sguide
