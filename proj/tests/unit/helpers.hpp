#pragma once

#include <cstddef>
#include <algorithm>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "pieceid/embedding.hpp"

namespace pieceid::testing {

inline std::vector<double> gaussian_rows(std::size_t rows, std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(rows * dim);
  for (auto& x : v) x = g(rng);
  return v;
}

inline SnippetSequence random_sequence(const std::string& id, Modality m, std::size_t rows, std::size_t dim,
                                       std::mt19937_64& rng) {
  return SnippetSequence(id, m, dim, gaussian_rows(rows, dim, rng));
}

/// Rows drawn from a small pool so that equal distances (and DP ties) are common.
inline SnippetSequence pooled_sequence(const std::string& id, Modality m, std::size_t rows,
                                       const std::vector<std::vector<double>>& pool, std::mt19937_64& rng) {
  std::vector<double> v;
  for (std::size_t i = 0; i < rows; ++i) {
    const auto& row = pool[rng() % pool.size()];
    v.insert(v.end(), row.begin(), row.end());
  }
  return SnippetSequence(id, m, pool.front().size(), v);
}

inline std::vector<double> transpose(const std::vector<double>& m, std::size_t rows, std::size_t cols) {
  std::vector<double> t(m.size());
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) t[j * rows + i] = m[i * cols + j];
  }
  return t;
}

/// Minimum over every monotone path with steps (1,1), (1,0), (0,1) from
/// (0, s) to (rows-1, e); costs are summed from the first cell onwards.
/// full: s = 0 and e = cols-1 only; otherwise any s and e.
inline double brute_force_alignment(const std::vector<double>& d, std::size_t rows, std::size_t cols, bool full) {
  double best = std::numeric_limits<double>::infinity();
  auto walk = [&](auto&& self, std::size_t i, std::size_t j, double acc) -> void {
    if (i == rows - 1 && (!full || j == cols - 1)) best = std::min(best, acc);
    if (i + 1 < rows && j + 1 < cols) self(self, i + 1, j + 1, acc + d[(i + 1) * cols + j + 1]);
    if (i + 1 < rows) self(self, i + 1, j, acc + d[(i + 1) * cols + j]);
    if (j + 1 < cols) self(self, i, j + 1, acc + d[i * cols + j + 1]);
  };
  const std::size_t last_start = full ? 0 : cols - 1;
  for (std::size_t s = 0; s <= last_start; ++s) walk(walk, 0, s, d[s]);
  return best;
}

}  // namespace pieceid::testing
