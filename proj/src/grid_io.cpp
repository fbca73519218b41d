#include "sguide/grid_io.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace sguide {

nlohmann::json grid_to_json(const ScalarGrid& grid) {
  nlohmann::json j;
  j["height"] = grid.height();
  j["width"] = grid.width();
  j["values"] = std::vector<double>(grid.values().begin(), grid.values().end());
  return j;
}

ScalarGrid grid_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("height") || !j.contains("width") || !j.contains("values")) {
    throw std::invalid_argument("grid json needs height, width and values");
  }
  ScalarGrid grid(j.at("height").get<int>(), j.at("width").get<int>(),
                  j.at("values").get<std::vector<double>>());
  if (!grid.all_finite()) throw std::invalid_argument("grid json contains non-finite values");
  return grid;
}

std::string grid_to_pgm(const ScalarGrid& grid) {
  std::string out = "P5\n" + std::to_string(grid.width()) + " " + std::to_string(grid.height()) +
                    "\n255\n";
  const double lo = grid.min();
  const double span = grid.max() - lo;
  out.reserve(out.size() + grid.size());
  for (double v : grid.values()) {
    const double scaled = span > 0.0 ? (v - lo) / span * 255.0 : 0.0;
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(scaled))));
  }
  return out;
}

void write_pgm(const ScalarGrid& grid, const std::filesystem::path& path) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const auto bytes = grid_to_pgm(grid);
  file.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!file) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace sguide
