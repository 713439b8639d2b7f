#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pieceid/embedding.hpp"
#include "pieceid/ranking.hpp"

namespace pieceid {

/// Every snippet of one modality across the corpus, flattened with its
/// provenance. Entries are laid out in (piece id, position) order so a
/// strict-less linear scan resolves equal distances to the lexicographically
/// smallest entry.
class SnippetIndex {
 public:
  static SnippetIndex build(const Corpus& corpus, Modality modality);

  std::size_t size() const noexcept { return piece_of_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  Modality modality() const noexcept { return modality_; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<const double> row(std::size_t e) const {
    return std::span<const double>(data_).subspan(e * dim_, dim_);
  }
  const std::string& piece_id(std::size_t e) const { return piece_ids_[piece_of_[e]]; }
  std::uint32_t piece_slot(std::size_t e) const { return piece_of_[e]; }
  std::uint32_t position(std::size_t e) const { return position_[e]; }

  /// Piece ids in index (lexicographic) order; piece_slot() indexes this.
  const std::vector<std::string>& pieces() const noexcept { return piece_ids_; }

  bool operator==(const SnippetIndex&) const = default;

 private:
  Modality modality_ = Modality::score;
  std::size_t dim_ = 0;
  std::vector<std::string> piece_ids_;
  std::vector<double> data_;
  std::vector<std::uint32_t> piece_of_;
  std::vector<std::uint32_t> position_;
};

struct SnippetHit {
  std::string piece_id;
  std::size_t position = 0;
  double distance = 0.0;

  bool operator==(const SnippetHit&) const = default;
};

SnippetHit nearest_snippet(const EmbeddingVector& x, const SnippetIndex& index);

/// Per-piece tallies accumulated while voting. Exposed so batch evaluation
/// can feed nearest-neighbour hits found elsewhere through the same ranking.
/// Distances are summed in sorted order, so the mean (and hence the ranking)
/// does not depend on the order in which votes arrived.
struct VoteTally {
  std::vector<double> distances;
};

/// Orders voted pieces by votes (desc), mean nearest distance (asc), then id,
/// and appends unvoted pieces in id order.
RankedList rank_votes(const std::vector<VoteTally>& tallies, const std::vector<std::string>& piece_ids,
                      std::string query_id);

/// Each query snippet votes for the piece of its nearest indexed snippet.
RankedList vote_rank(const SnippetSequence& q, const SnippetIndex& index);

}  // namespace pieceid
