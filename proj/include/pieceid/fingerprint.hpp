#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "pieceid/embedding.hpp"
#include "pieceid/ranking.hpp"

namespace pieceid {

/// Landmark-hashing parameters for embedding fingerprints. A key packs the
/// anchor code, the target code and their snippet delta, so planes <= 28 and
/// max_delta <= 255 keep it inside 64 bits.
struct FingerprintParams {
  unsigned planes = 16;
  unsigned fan_out = 5;
  unsigned max_delta = 10;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const FingerprintParams&) const = default;
};

/// Random hyperplane normals (planes x dim), Gaussian, drawn from `seed`.
std::vector<EmbeddingVector> make_planes(unsigned planes, std::size_t dim, std::uint64_t seed);

/// Bit b is set iff dot(v, planes[b]) >= 0.
std::uint32_t quantize(const EmbeddingVector& v, const std::vector<EmbeddingVector>& planes);

struct FingerprintKey {
  std::uint64_t code = 0;
  bool operator==(const FingerprintKey&) const = default;
};

FingerprintKey make_key(std::uint32_t anchor_code, std::uint32_t target_code, unsigned delta, unsigned planes);

struct KeyAt {
  FingerprintKey key;
  std::uint32_t anchor = 0;
  bool operator==(const KeyAt&) const = default;
};

/// Pairs each anchor t with up to fan_out targets t' where 0 < t' - t <= max_delta.
std::vector<KeyAt> build_fingerprints(const SnippetSequence& seq, const FingerprintParams& params,
                                      const std::vector<EmbeddingVector>& planes);

struct Posting {
  std::uint32_t piece = 0;  // slot into FingerprintIndex::pieces()
  std::uint32_t anchor = 0;
  bool operator==(const Posting&) const = default;
};

class FingerprintIndex {
 public:
  static FingerprintIndex build(const Corpus& corpus, Modality modality, const FingerprintParams& params);

  const FingerprintParams& params() const noexcept { return params_; }
  const std::vector<EmbeddingVector>& planes() const noexcept { return planes_; }
  const std::vector<std::string>& pieces() const noexcept { return piece_ids_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t key_count() const noexcept { return table_.size(); }
  std::size_t posting_count() const noexcept { return postings_; }
  /// Number of keys piece `slot` contributed.
  std::size_t keys_of(std::size_t slot) const { return keys_per_piece_.at(slot); }

  const std::vector<Posting>* lookup(FingerprintKey key) const;

  /// Binary layout: "AFPI1", params, dim, planes, piece ids, then postings
  /// grouped by ascending key. Byte-identical for identical inputs.
  void save(std::ostream& out) const;
  static FingerprintIndex load(std::istream& in);

  bool operator==(const FingerprintIndex&) const = default;

 private:
  FingerprintParams params_;
  std::size_t dim_ = 0;
  std::vector<EmbeddingVector> planes_;
  std::vector<std::string> piece_ids_;
  std::vector<std::size_t> keys_per_piece_;
  std::unordered_map<std::uint64_t, std::vector<Posting>> table_;
  std::size_t postings_ = 0;
};

/// Scores each piece by its tallest single-offset bin of matching keys,
/// offset = indexed anchor - query anchor. Descending, ties by piece id;
/// pieces without collisions go to `unscored`.
RankedList fingerprint_rank(const SnippetSequence& q, const FingerprintIndex& index);

}  // namespace pieceid
