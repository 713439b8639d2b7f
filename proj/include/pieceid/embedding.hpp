#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pieceid {

enum class Modality { score, audio };

std::string_view to_string(Modality m);

/// A snippet's position in the shared embedding space.
///
/// Vectors produced by normalize() remember that they are unit length, so
/// normalizing twice is the identity and distances computed on stored
/// sequence rows match distances computed on extracted vectors bit for bit.
class EmbeddingVector {
 public:
  explicit EmbeddingVector(std::vector<double> values);

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  bool is_unit() const noexcept { return unit_; }
  double norm() const;

  bool operator==(const EmbeddingVector& other) const { return values_ == other.values_; }

 private:
  friend EmbeddingVector normalize(const EmbeddingVector& v);
  friend class SnippetSequence;
  EmbeddingVector(std::vector<double> values, bool unit) : values_(std::move(values)), unit_(unit) {}

  std::vector<double> values_;
  bool unit_ = false;
};

/// Throws ZeroVector when the norm is below 1e-12.
EmbeddingVector normalize(const EmbeddingVector& v);

/// Fused multiply-add chain in coordinate order. Every distance in the
/// library goes through this ordering, so dot(a, b) == dot(b, a) exactly.
double dot(std::span<const double> a, std::span<const double> b);

/// 1 - dot for unit vectors, clamped to [0, 2].
inline double distance_from_dot(double d) {
  const double v = 1.0 - d;
  return v < 0.0 ? 0.0 : (v > 2.0 ? 2.0 : v);
}

double cosine_distance(const EmbeddingVector& a, const EmbeddingVector& b);

/// Temporally ordered, unit-normalized embeddings for one view of one piece
/// (or one query fragment). Rows are stored contiguously, row-major.
class SnippetSequence {
 public:
  /// Normalizes every row of `row_major` (count x dim values).
  SnippetSequence(std::string piece_id, Modality modality, std::size_t dim,
                  std::span<const double> row_major);

  static SnippetSequence from_vectors(std::string piece_id, Modality modality,
                                      std::span<const EmbeddingVector> vectors);

  std::size_t size() const noexcept { return dim_ == 0 ? 0 : data_.size() / dim_; }
  std::size_t dim() const noexcept { return dim_; }
  const std::string& piece_id() const noexcept { return piece_id_; }
  Modality modality() const noexcept { return modality_; }
  std::span<const double> data() const noexcept { return data_; }

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data_).subspan(i * dim_, dim_);
  }
  EmbeddingVector operator[](std::size_t i) const;

  /// Contiguous copy of rows [start, start + length); rows keep their bits.
  SnippetSequence slice(std::size_t start, std::size_t length) const;

  /// Same rows in a new order (used for permutation properties).
  SnippetSequence reordered(std::span<const std::size_t> order) const;

  SnippetSequence with_id(std::string piece_id) const;

  bool operator==(const SnippetSequence& other) const = default;

 private:
  struct Trusted {};
  SnippetSequence(Trusted, std::string piece_id, Modality modality, std::size_t dim,
                  std::vector<double> data)
      : piece_id_(std::move(piece_id)), modality_(modality), dim_(dim), data_(std::move(data)) {}

  std::string piece_id_;
  Modality modality_;
  std::size_t dim_;
  std::vector<double> data_;
};

struct PieceTags {
  bool has_repeats = false;
  bool degenerate = false;

  bool operator==(const PieceTags&) const = default;
};

struct Piece {
  std::string id;
  std::optional<SnippetSequence> score;
  std::optional<SnippetSequence> audio;
  PieceTags tags;

  /// Throws MissingView when the requested view is absent.
  const SnippetSequence& view(Modality m) const;
  bool has_view(Modality m) const { return m == Modality::score ? score.has_value() : audio.has_value(); }

  bool operator==(const Piece&) const = default;
};

/// The search collection. Piece order is the order given at construction and
/// is never changed.
class Corpus {
 public:
  Corpus() = default;
  /// Validates unique ids, matching dims, and that every view's piece id
  /// equals its piece's id.
  explicit Corpus(std::vector<Piece> pieces);

  std::size_t size() const noexcept { return pieces_.size(); }
  bool empty() const noexcept { return pieces_.empty(); }
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<Piece>& pieces() const noexcept { return pieces_; }
  const Piece& operator[](std::size_t i) const { return pieces_[i]; }

  std::optional<std::size_t> find(std::string_view id) const;
  std::vector<std::string> ids() const;

  /// Pieces at `indices`, in the order given.
  Corpus subset(std::span<const std::size_t> indices) const;

  bool operator==(const Corpus&) const = default;

 private:
  std::vector<Piece> pieces_;
  std::size_t dim_ = 0;
};

/// Pairwise cosine distances between a query (rows) and a candidate (cols).
class DistanceMatrix {
 public:
  DistanceMatrix(std::size_t rows, std::size_t cols, std::vector<double> entries);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double operator()(std::size_t i, std::size_t j) const { return entries_[i * cols_ + j]; }
  std::span<const double> entries() const noexcept { return entries_; }

  DistanceMatrix transposed() const;

  bool operator==(const DistanceMatrix&) const = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> entries_;
};

/// Candidate rows laid out once for repeated distance queries against
/// different query rows.
class CandidateBlock {
 public:
  CandidateBlock(std::span<const double> d, std::size_t d_rows, std::size_t dim);

  std::size_t rows() const { return rows_; }

  /// q_rows x rows() distances into `out` (row-major), each bit-identical to
  /// cosine_distance of the corresponding unit rows.
  void distances(std::span<const double> q, std::size_t q_rows, std::span<double> out) const;

 private:
  std::span<const double> d_;
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> transposed_;  // dim x rows_, when the SIMD kernel is built
};

/// Writes rows(q) x rows(d) distances into `out` (row-major). Every entry is
/// bit-identical to cosine_distance(q[i], d[j]).
void cross_distances(std::span<const double> q, std::size_t q_rows,
                     std::span<const double> d, std::size_t d_rows, std::size_t dim,
                     std::span<double> out);

/// Lowers row_min[r] and col_min[c] to the smallest entry of each row and
/// column of a row-major rows x cols block.
void fold_minima(std::span<const double> block, std::size_t rows, std::size_t cols, std::span<double> row_min,
                 std::span<double> col_min);

DistanceMatrix distance_matrix(const SnippetSequence& q, const SnippetSequence& d);

}  // namespace pieceid
