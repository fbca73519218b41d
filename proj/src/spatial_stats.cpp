#include "sguide/spatial_stats.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sguide {

double cell_center(int zero_based_index, int cells) {
  return (static_cast<double>(zero_based_index) + 0.5) / static_cast<double>(cells);
}

Centroid centroid(const ScalarGrid& map) {
  if (!map.is_distribution()) {
    throw std::invalid_argument("centroid: map is not a distribution grid");
  }
  double x = 0.0;
  double y = 0.0;
  for (int h = 0; h < map.height(); ++h) {
    const double yh = cell_center(h, map.height());
    for (int w = 0; w < map.width(); ++w) {
      const double m = map(h, w);
      x += m * cell_center(w, map.width());
      y += m * yh;
    }
  }
  return {x, y};
}

double variance(const ScalarGrid& map, const Centroid& c) {
  if (!map.is_distribution()) {
    throw std::invalid_argument("variance: map is not a distribution grid");
  }
  double v = 0.0;
  for (int h = 0; h < map.height(); ++h) {
    const double dy = cell_center(h, map.height()) - c.y;
    for (int w = 0; w < map.width(); ++w) {
      const double dx = cell_center(w, map.width()) - c.x;
      v += map(h, w) * (dx * dx + dy * dy);
    }
  }
  return v;
}

double relation_delta(const Centroid& a, const Centroid& b, Relation relation) {
  switch (relation) {
    case Relation::Left: return b.x - a.x;
    case Relation::Right: return a.x - b.x;
    case Relation::Above: return b.y - a.y;
    case Relation::Below: return a.y - b.y;
    case Relation::Near: return std::abs(a.x - b.x);
  }
  return 0.0;
}

bool TokenStats::has(Level level) const {
  for (const auto& e : entries[static_cast<std::size_t>(level_index(level))])
    if (!e) return false;
  return true;
}

const LayerStats& TokenStats::at(Level level, int layer) const {
  const auto& e = entries[static_cast<std::size_t>(level_index(level))]
                         [static_cast<std::size_t>(layer)];
  if (!e) {
    throw std::invalid_argument(std::string("token stats: level ") + level_name(level) +
                                " was not computed");
  }
  return *e;
}

std::size_t TokenStats::count() const {
  std::size_t n = 0;
  for (const auto& level : entries)
    for (const auto& e : level) n += e.has_value() ? 1 : 0;
  return n;
}

TokenStats stats_for_token(const AttentionStack& stack, Token token,
                           std::span<const Level> levels) {
  TokenStats out;
  for (Level level : levels) {
    for (int layer = 0; layer < kLayersPerLevel; ++layer) {
      const ScalarGrid& map = stack.at(level, layer, token);
      if (map.empty()) {
        throw std::invalid_argument(std::string("stats_for_token: level ") + level_name(level) +
                                    " missing from the attention stack");
      }
      LayerStats s;
      s.centroid = centroid(map);
      s.variance = variance(map, s.centroid);
      out.entries[static_cast<std::size_t>(level_index(level))][static_cast<std::size_t>(layer)] = s;
    }
  }
  return out;
}

}  // namespace sguide
