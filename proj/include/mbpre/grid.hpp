#pragma once

#include <span>
#include <stdexcept>
#include <string>

namespace mbpre {

// Throws std::invalid_argument unless the grid is nonempty, positive and
// strictly increasing.
inline void require_grid(std::span<const int> grid, const char* who) {
  if (grid.empty()) throw std::invalid_argument(std::string(who) + ": empty n grid");
  if (grid.front() < 1) throw std::invalid_argument(std::string(who) + ": grid values must be >= 1");
  for (std::size_t k = 1; k < grid.size(); ++k)
    if (grid[k] <= grid[k - 1])
      throw std::invalid_argument(std::string(who) + ": n grid must be strictly increasing");
}

}  // namespace mbpre
