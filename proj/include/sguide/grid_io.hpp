#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "sguide/grid.hpp"

namespace sguide {

// {"height": H, "width": W, "values": [...]} with row-major values.
nlohmann::json grid_to_json(const ScalarGrid& grid);
ScalarGrid grid_from_json(const nlohmann::json& j);

// Binary 8-bit PGM (P5); values are min-max scaled to 0..255, a constant grid
// maps to all zeros.
std::string grid_to_pgm(const ScalarGrid& grid);
void write_pgm(const ScalarGrid& grid, const std::filesystem::path& path);

}  // namespace sguide
