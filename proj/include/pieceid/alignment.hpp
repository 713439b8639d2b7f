#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "pieceid/embedding.hpp"
#include "pieceid/ranking.hpp"

namespace pieceid {

enum class AlignmentKind { full, subsequence };

std::string_view to_string(AlignmentKind k);

/// Whether the optimal warping path is materialized. Cost-only alignment runs
/// on a two-row rolling buffer; it still reports the path length.
enum class PathMode { with_path, cost_only };

struct PathCell {
  std::size_t query = 0;
  std::size_t candidate = 0;

  bool operator==(const PathCell&) const = default;
};

struct AlignmentResult {
  double cost = 0.0;
  double normalized_cost = 0.0;  // cost / path_length
  std::size_t path_length = 0;
  std::vector<PathCell> path;  // empty in cost_only mode
  AlignmentKind kind = AlignmentKind::full;
  std::size_t match_start = 0;  // candidate index of the first path cell
  std::size_t match_end = 0;    // candidate index of the last path cell
};

/// Minimum-cost monotone alignment over a row-major rows x cols distance
/// buffer with steps (1,1), (1,0), (0,1) at unit weight. Equal-cost
/// predecessors resolve diagonal first, then (1,0), then (0,1).
///
/// full: anchored at (0, 0) and (rows-1, cols-1).
/// subsequence: the query must be consumed entirely but may start at any
/// candidate column (zero prefix cost) and end at the cheapest last-row cell,
/// lowest column on ties.
AlignmentResult align(std::span<const double> distances, std::size_t rows, std::size_t cols,
                      AlignmentKind kind, PathMode mode = PathMode::with_path);

AlignmentResult align(const DistanceMatrix& dm, AlignmentKind kind, PathMode mode = PathMode::with_path);

AlignmentResult dtw(const SnippetSequence& q, const SnippetSequence& d, PathMode mode = PathMode::with_path);

AlignmentResult sdtw(const SnippetSequence& fragment, const SnippetSequence& full,
                     PathMode mode = PathMode::with_path);

struct FullCost {
  double cost = 0.0;
  std::size_t path_length = 0;             // tie rules applied to this matrix
  std::size_t transposed_path_length = 0;  // tie rules applied to its transpose
};

/// Cost-only full alignment that also reports the path length the transposed
/// problem would select. Both orientations share the same accumulated cost.
FullCost full_cost_both(std::span<const double> distances, std::size_t rows, std::size_t cols);

/// Writes distance rows [first, first + count) into `out` (count x cols).
using RowFill = std::function<void(std::size_t first, std::size_t count, std::span<double> out)>;

/// As above with rows produced on demand, in increasing order, a few at a
/// time; the whole matrix is never held.
FullCost full_cost_both(const RowFill& fill, std::size_t rows, std::size_t cols);

/// Scores every corpus piece by the normalized alignment cost of `q` against
/// the candidate view picked by `direction`; ascending, ties by piece id.
/// With threads > 1 candidates are evaluated concurrently; the output is
/// identical to the sequential run.
RankedList rank_by_alignment(const SnippetSequence& q, const Corpus& corpus, AlignmentKind mode,
                             Direction direction, unsigned threads = 1);

/// Sorts (ascending cost) and ties by piece id; shared with batch evaluation.
void sort_by_cost(std::vector<RankedItem>& items);

}  // namespace pieceid
