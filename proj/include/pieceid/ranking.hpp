#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pieceid/embedding.hpp"

namespace pieceid {

/// a2s: audio queries against score views; s2a: the reverse.
enum class Direction { a2s, s2a };

std::string_view to_string(Direction d);
Direction parse_direction(std::string_view s);

constexpr Modality query_modality(Direction d) { return d == Direction::a2s ? Modality::audio : Modality::score; }
constexpr Modality candidate_modality(Direction d) {
  return d == Direction::a2s ? Modality::score : Modality::audio;
}

enum class ScoreOrder {
  ascending_cost,    // alignment methods: lower is better
  descending_score,  // vote and fingerprint methods: higher is better
};

struct RankedItem {
  std::string piece_id;
  double score = 0.0;

  bool operator==(const RankedItem&) const = default;
};

/// Best match first. `items` holds every scored piece; `unscored` holds the
/// remaining corpus pieces in piece-id order, so items followed by unscored
/// is a total order over the corpus.
struct RankedList {
  std::string query_id;
  std::optional<std::string> truth_id;
  ScoreOrder order = ScoreOrder::ascending_cost;
  std::vector<RankedItem> items;
  std::vector<std::string> unscored;

  std::size_t total() const { return items.size() + unscored.size(); }
  /// Piece id at 0-based position `i` of the completed order.
  const std::string& at(std::size_t i) const {
    return i < items.size() ? items[i].piece_id : unscored.at(i - items.size());
  }

  bool operator==(const RankedList&) const = default;
};

/// Fills `unscored` with every id in `corpus_ids` absent from `items`,
/// sorted lexicographically.
void complete_ranking(RankedList& rl, const std::vector<std::string>& corpus_ids);

}  // namespace pieceid
