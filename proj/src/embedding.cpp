#include "pieceid/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#if defined(__AVX512F__) || (defined(__AVX2__) && defined(__FMA__))
#include <immintrin.h>
#endif

#include "pieceid/error.hpp"

namespace pieceid {

std::string_view to_string(Modality m) { return m == Modality::score ? "score" : "audio"; }

namespace {

constexpr double kZeroNorm = 1e-12;

double norm_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s = std::fma(x, x, s);
  return std::sqrt(s);
}

void normalize_into(std::span<const double> in, std::span<double> out) {
  const double n = norm_of(in);
  if (!(n >= kZeroNorm)) throw Error(ErrorCode::ZeroVector, "cannot normalize a vector with norm < 1e-12");
  for (std::size_t k = 0; k < in.size(); ++k) out[k] = in[k] / n;
}

}  // namespace

EmbeddingVector::EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw Error(ErrorCode::DimensionMismatch, "embedding vector must have dim >= 1");
}

double EmbeddingVector::norm() const { return norm_of(values_); }

EmbeddingVector normalize(const EmbeddingVector& v) {
  if (v.unit_) return v;
  std::vector<double> out(v.dim());
  normalize_into(v.values_, out);
  return EmbeddingVector(std::move(out), true);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc = std::fma(a[k], b[k], acc);
  return acc;
}

double cosine_distance(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorCode::DimensionMismatch,
                "dims " + std::to_string(a.dim()) + " and " + std::to_string(b.dim()));
  }
  const EmbeddingVector na = normalize(a);
  const EmbeddingVector nb = normalize(b);
  return distance_from_dot(dot(na.values(), nb.values()));
}

// ---------------------------------------------------------------------------

SnippetSequence::SnippetSequence(std::string piece_id, Modality modality, std::size_t dim,
                                 std::span<const double> row_major)
    : piece_id_(std::move(piece_id)), modality_(modality), dim_(dim) {
  if (dim == 0) throw Error(ErrorCode::DimensionMismatch, "dim must be positive");
  if (row_major.empty()) throw Error(ErrorCode::EmptySequence, "sequence '" + piece_id_ + "' is empty");
  if (row_major.size() % dim != 0) {
    throw Error(ErrorCode::DimensionMismatch,
                "sequence '" + piece_id_ + "' payload is not a multiple of dim " + std::to_string(dim));
  }
  data_.resize(row_major.size());
  for (std::size_t off = 0; off < row_major.size(); off += dim) {
    normalize_into(row_major.subspan(off, dim), std::span<double>(data_).subspan(off, dim));
  }
}

SnippetSequence SnippetSequence::from_vectors(std::string piece_id, Modality modality,
                                              std::span<const EmbeddingVector> vectors) {
  if (vectors.empty()) throw Error(ErrorCode::EmptySequence, "sequence '" + piece_id + "' is empty");
  const std::size_t dim = vectors.front().dim();
  std::vector<double> flat;
  flat.reserve(vectors.size() * dim);
  for (const auto& v : vectors) {
    if (v.dim() != dim) throw Error(ErrorCode::DimensionMismatch, "mixed dims in sequence '" + piece_id + "'");
    const EmbeddingVector u = normalize(v);
    flat.insert(flat.end(), u.values().begin(), u.values().end());
  }
  return SnippetSequence(Trusted{}, std::move(piece_id), modality, dim, std::move(flat));
}

EmbeddingVector SnippetSequence::operator[](std::size_t i) const {
  const auto r = row(i);
  return EmbeddingVector(std::vector<double>(r.begin(), r.end()), true);
}

SnippetSequence SnippetSequence::slice(std::size_t start, std::size_t length) const {
  if (length == 0) throw Error(ErrorCode::EmptySequence, "empty slice of '" + piece_id_ + "'");
  if (start + length > size()) {
    throw Error(ErrorCode::FragmentTooLong, "slice [" + std::to_string(start) + ", " +
                                                std::to_string(start + length) + ") exceeds length " +
                                                std::to_string(size()) + " of '" + piece_id_ + "'");
  }
  const auto first = data_.begin() + static_cast<std::ptrdiff_t>(start * dim_);
  return SnippetSequence(Trusted{}, piece_id_, modality_, dim_,
                         std::vector<double>(first, first + static_cast<std::ptrdiff_t>(length * dim_)));
}

SnippetSequence SnippetSequence::reordered(std::span<const std::size_t> order) const {
  std::vector<double> out;
  out.reserve(order.size() * dim_);
  for (std::size_t i : order) {
    const auto r = row(i);
    out.insert(out.end(), r.begin(), r.end());
  }
  if (out.empty()) throw Error(ErrorCode::EmptySequence, "empty reorder of '" + piece_id_ + "'");
  return SnippetSequence(Trusted{}, piece_id_, modality_, dim_, std::move(out));
}

SnippetSequence SnippetSequence::with_id(std::string piece_id) const {
  return SnippetSequence(Trusted{}, std::move(piece_id), modality_, dim_, data_);
}

// ---------------------------------------------------------------------------

const SnippetSequence& Piece::view(Modality m) const {
  const auto& v = m == Modality::score ? score : audio;
  if (!v) throw Error(ErrorCode::MissingView, "piece '" + id + "' has no " + std::string(to_string(m)) + " view");
  return *v;
}

Corpus::Corpus(std::vector<Piece> pieces) : pieces_(std::move(pieces)) {
  std::set<std::string_view> seen;
  for (const auto& p : pieces_) {
    if (!seen.insert(p.id).second) throw Error(ErrorCode::DuplicateId, "duplicate piece id '" + p.id + "'");
    for (const auto* v : {&p.score, &p.audio}) {
      if (!*v) continue;
      if ((*v)->piece_id() != p.id) {
        throw Error(ErrorCode::BadManifest, "view id '" + (*v)->piece_id() + "' inside piece '" + p.id + "'");
      }
      if (dim_ == 0) dim_ = (*v)->dim();
      if ((*v)->dim() != dim_) {
        throw Error(ErrorCode::DimensionMismatch, "piece '" + p.id + "' has dim " + std::to_string((*v)->dim()) +
                                                      ", corpus dim is " + std::to_string(dim_));
      }
    }
  }
}

std::optional<std::size_t> Corpus::find(std::string_view id) const {
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    if (pieces_[i].id == id) return i;
  }
  return std::nullopt;
}

std::vector<std::string> Corpus::ids() const {
  std::vector<std::string> out;
  out.reserve(pieces_.size());
  for (const auto& p : pieces_) out.push_back(p.id);
  return out;
}

Corpus Corpus::subset(std::span<const std::size_t> indices) const {
  std::vector<Piece> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(pieces_.at(i));
  return Corpus(std::move(out));
}

// ---------------------------------------------------------------------------

DistanceMatrix::DistanceMatrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
  if (entries_.size() != rows_ * cols_) throw Error(ErrorCode::DimensionMismatch, "distance matrix shape");
}

DistanceMatrix DistanceMatrix::transposed() const {
  std::vector<double> t(entries_.size());
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) t[j * rows_ + i] = entries_[i * cols_ + j];
  }
  return DistanceMatrix(cols_, rows_, std::move(t));
}

namespace {

// Register-blocked micro-kernel: kRowBlock query rows x (2 * kLanes)
// candidate columns. Each lane runs the same fma chain in coordinate order
// as dot(), so blocked and scalar entries agree bit for bit.
#if defined(__AVX512F__)
using Vec = __m512d;
constexpr std::size_t kLanes = 8;
inline Vec vzero() { return _mm512_setzero_pd(); }
inline Vec vload(const double* p) { return _mm512_loadu_pd(p); }
inline Vec vbroadcast(double x) { return _mm512_set1_pd(x); }
inline Vec vfma(Vec a, Vec b, Vec c) { return _mm512_fmadd_pd(a, b, c); }
inline void vstore(double* p, Vec v) { _mm512_storeu_pd(p, v); }
inline Vec vsub(Vec a, Vec b) { return _mm512_sub_pd(a, b); }
inline Vec vmin(Vec a, Vec b) { return _mm512_min_pd(a, b); }
inline Vec vmax(Vec a, Vec b) { return _mm512_max_pd(a, b); }
#define PIECEID_SIMD 1
#elif defined(__AVX2__) && defined(__FMA__)
using Vec = __m256d;
constexpr std::size_t kLanes = 4;
inline Vec vzero() { return _mm256_setzero_pd(); }
inline Vec vload(const double* p) { return _mm256_loadu_pd(p); }
inline Vec vbroadcast(double x) { return _mm256_set1_pd(x); }
inline Vec vfma(Vec a, Vec b, Vec c) { return _mm256_fmadd_pd(a, b, c); }
inline void vstore(double* p, Vec v) { _mm256_storeu_pd(p, v); }
inline Vec vsub(Vec a, Vec b) { return _mm256_sub_pd(a, b); }
inline Vec vmin(Vec a, Vec b) { return _mm256_min_pd(a, b); }
inline Vec vmax(Vec a, Vec b) { return _mm256_max_pd(a, b); }
#define PIECEID_SIMD 1
#endif

#ifdef PIECEID_SIMD
constexpr std::size_t kRowBlock = 4;
constexpr std::size_t kColBlock = 2 * kLanes;

// Vector form of distance_from_dot.
inline void finish_row(Vec lo, Vec hi, double* o) {
  const Vec one = vbroadcast(1.0), zero = vzero(), two = vbroadcast(2.0);
  vstore(o, vmin(vmax(vsub(one, lo), zero), two));
  vstore(o + kLanes, vmin(vmax(vsub(one, hi), zero), two));
}

// Accumulators are named locals so they stay in registers across the k loop.
void block_kernel4(const double* qa, std::size_t dim, const double* dt, std::size_t d_rows, std::size_t j0,
                   double* out, std::size_t out_stride) {
  Vec a0 = vzero(), a1 = vzero(), b0 = vzero(), b1 = vzero();
  Vec c0 = vzero(), c1 = vzero(), d0 = vzero(), d1 = vzero();
  const double* q0 = qa;
  const double* q1 = qa + dim;
  const double* q2 = qa + 2 * dim;
  const double* q3 = qa + 3 * dim;
  for (std::size_t k = 0; k < dim; ++k) {
    const double* col = dt + k * d_rows + j0;
    const Vec lo = vload(col);
    const Vec hi = vload(col + kLanes);
    Vec x = vbroadcast(q0[k]);
    a0 = vfma(x, lo, a0);
    a1 = vfma(x, hi, a1);
    x = vbroadcast(q1[k]);
    b0 = vfma(x, lo, b0);
    b1 = vfma(x, hi, b1);
    x = vbroadcast(q2[k]);
    c0 = vfma(x, lo, c0);
    c1 = vfma(x, hi, c1);
    x = vbroadcast(q3[k]);
    d0 = vfma(x, lo, d0);
    d1 = vfma(x, hi, d1);
  }
  finish_row(a0, a1, out + j0);
  finish_row(b0, b1, out + out_stride + j0);
  finish_row(c0, c1, out + 2 * out_stride + j0);
  finish_row(d0, d1, out + 3 * out_stride + j0);
}

void block_kernel1(const double* qa, std::size_t dim, const double* dt, std::size_t d_rows, std::size_t j0,
                   double* out) {
  Vec a0 = vzero(), a1 = vzero();
  for (std::size_t k = 0; k < dim; ++k) {
    const double* col = dt + k * d_rows + j0;
    const Vec x = vbroadcast(qa[k]);
    a0 = vfma(x, vload(col), a0);
    a1 = vfma(x, vload(col + kLanes), a1);
  }
  finish_row(a0, a1, out + j0);
}
#endif

}  // namespace

CandidateBlock::CandidateBlock(std::span<const double> d, std::size_t d_rows, std::size_t dim)
    : d_(d), rows_(d_rows), dim_(dim) {
#ifdef PIECEID_SIMD
  // dim x d_rows so column blocks load contiguously.
  transposed_.resize(dim * d_rows);
  for (std::size_t j = 0; j < d_rows; ++j) {
    for (std::size_t k = 0; k < dim; ++k) transposed_[k * d_rows + j] = d[j * dim + k];
  }
#endif
}

void CandidateBlock::distances(std::span<const double> q, std::size_t q_rows, std::span<double> out) const {
  const std::size_t d_rows = rows_;
  const std::size_t dim = dim_;
  std::size_t j_full = 0;
#ifdef PIECEID_SIMD
  j_full = d_rows - d_rows % kColBlock;
  const std::size_t i_full = q_rows - q_rows % kRowBlock;
  for (std::size_t j0 = 0; j0 < j_full; j0 += kColBlock) {
    for (std::size_t i0 = 0; i0 < i_full; i0 += kRowBlock) {
      block_kernel4(q.data() + i0 * dim, dim, transposed_.data(), d_rows, j0, out.data() + i0 * d_rows, d_rows);
    }
    for (std::size_t i = i_full; i < q_rows; ++i) {
      block_kernel1(q.data() + i * dim, dim, transposed_.data(), d_rows, j0, out.data() + i * d_rows);
    }
  }
#endif
  for (std::size_t i = 0; i < q_rows; ++i) {
    for (std::size_t j = j_full; j < d_rows; ++j) {
      out[i * d_rows + j] = distance_from_dot(dot(q.subspan(i * dim, dim), d_.subspan(j * dim, dim)));
    }
  }
}

void cross_distances(std::span<const double> q, std::size_t q_rows, std::span<const double> d,
                     std::size_t d_rows, std::size_t dim, std::span<double> out) {
  CandidateBlock(d, d_rows, dim).distances(q, q_rows, out);
}

void fold_minima(std::span<const double> block, std::size_t rows, std::size_t cols, std::span<double> row_min,
                 std::span<double> col_min) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = block.data() + r * cols;
    double* cm = col_min.data();
    double m = row_min[r];
    std::size_t c = 0;
#ifdef PIECEID_SIMD
    Vec mv = vbroadcast(m);
    for (; c + kLanes <= cols; c += kLanes) {
      const Vec x = vload(row + c);
      mv = vmin(mv, x);
      vstore(cm + c, vmin(vload(cm + c), x));
    }
    alignas(64) double lanes[kLanes];
    vstore(lanes, mv);
    for (double x : lanes) m = std::min(m, x);
#endif
    for (; c < cols; ++c) {
      m = std::min(m, row[c]);
      cm[c] = std::min(cm[c], row[c]);
    }
    row_min[r] = m;
  }
}

DistanceMatrix distance_matrix(const SnippetSequence& q, const SnippetSequence& d) {
  if (q.dim() != d.dim()) {
    throw Error(ErrorCode::DimensionMismatch,
                "query dim " + std::to_string(q.dim()) + " vs candidate dim " + std::to_string(d.dim()));
  }
  std::vector<double> entries(q.size() * d.size());
  cross_distances(q.data(), q.size(), d.data(), d.size(), q.dim(), entries);
  return DistanceMatrix(q.size(), d.size(), std::move(entries));
}

}  // namespace pieceid
