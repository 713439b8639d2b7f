#include "pieceid/alignment.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>

#if defined(__AVX512F__)
#include <immintrin.h>
#endif

#include "pieceid/error.hpp"
#include "pieceid/parallel.hpp"

namespace pieceid {

std::string_view to_string(AlignmentKind k) { return k == AlignmentKind::full ? "full" : "subsequence"; }

namespace {

enum Move : std::uint8_t { kStart = 0, kDiag = 1, kUp = 2, kLeft = 3 };

// Returns the chosen predecessor; diag wins ties, then up, then left.
inline Move pick(double diag, double up, double left) {
  if (diag <= up && diag <= left) return kDiag;
  if (up <= left) return kUp;
  return kLeft;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

struct CostOnly {
  double cost = 0.0;
  std::size_t length = 0;
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t alt_length = 0;  // with (0,1) preferred over (1,0) on ties
};

constexpr std::size_t kStripRows = 32;

// Distance rows, either from a whole matrix or produced on demand strip by
// strip. Rows must be requested in increasing order.
class RowSource {
 public:
  RowSource(std::span<const double> whole, std::size_t cols) : whole_(whole), cols_(cols) {}
  RowSource(const RowFill& fill, std::size_t cols) : fill_(&fill), cols_(cols) {}

  const double* rows(std::size_t first, std::size_t count) {
    if (fill_ == nullptr) return whole_.data() + first * cols_;
    scratch_.resize(count * cols_);
    (*fill_)(first, count, scratch_);
    return scratch_.data();
  }

 private:
  std::span<const double> whole_;
  const RowFill* fill_ = nullptr;
  std::size_t cols_;
  std::vector<double> scratch_;
};

std::size_t pick_end(const double* last_row, std::size_t cols, AlignmentKind kind) {
  if (kind == AlignmentKind::full) return cols - 1;
  std::size_t end = 0;
  for (std::size_t j = 1; j < cols; ++j) {
    if (last_row[j] < last_row[end]) end = j;
  }
  return end;
}

// Two-row rolling DP. Tracks path length and start column per cell; the
// alternate length follows the transposed problem's tie preference (the
// accumulated costs of the two orientations are identical).
CostOnly cost_only_scalar(RowSource& src, std::size_t rows, std::size_t cols, AlignmentKind kind) {
  std::vector<double> prev(cols), cur(cols);
  const double* strip = nullptr;
  auto row_at = [&](std::size_t i) {
    if (i % kStripRows == 0) strip = src.rows(i, std::min(kStripRows, rows - i));
    return strip + (i % kStripRows) * cols;
  };
  std::vector<std::uint32_t> prev_len(cols), cur_len(cols);
  std::vector<std::uint32_t> prev_alt(cols), cur_alt(cols);
  std::vector<std::uint32_t> prev_start(cols), cur_start(cols);

  const double* row = row_at(0);
  if (kind == AlignmentKind::full) {
    prev[0] = row[0];
    prev_len[0] = prev_alt[0] = 1;
    for (std::size_t j = 1; j < cols; ++j) {
      prev[j] = row[j] + prev[j - 1];
      prev_len[j] = prev_alt[j] = prev_len[j - 1] + 1;
    }
  } else {
    for (std::size_t j = 0; j < cols; ++j) {
      prev[j] = row[j];
      prev_len[j] = prev_alt[j] = 1;
      prev_start[j] = static_cast<std::uint32_t>(j);
    }
  }

  for (std::size_t i = 1; i < rows; ++i) {
    row = row_at(i);
    cur[0] = row[0] + prev[0];
    cur_len[0] = prev_len[0] + 1;
    cur_alt[0] = prev_alt[0] + 1;
    cur_start[0] = prev_start[0];
    for (std::size_t j = 1; j < cols; ++j) {
      // Branch-free form of pick(): diag on ties, then up, then left.
      const double diag = prev[j - 1];
      const double up = prev[j];
      const double left = cur[j - 1];
      const bool take_up = up < diag;
      const double vert = take_up ? up : diag;
      const std::uint32_t vert_len = take_up ? prev_len[j] : prev_len[j - 1];
      const std::uint32_t vert_start = take_up ? prev_start[j] : prev_start[j - 1];
      const bool take_left = left < vert;
      cur[j] = row[j] + (take_left ? left : vert);
      cur_len[j] = (take_left ? cur_len[j - 1] : vert_len) + 1;
      cur_start[j] = take_left ? cur_start[j - 1] : vert_start;
      // Transposed preference: diag, then left, then up.
      const bool alt_left = left < diag;
      const double horiz = alt_left ? left : diag;
      const std::uint32_t horiz_alt = alt_left ? cur_alt[j - 1] : prev_alt[j - 1];
      cur_alt[j] = (up < horiz ? prev_alt[j] : horiz_alt) + 1;
    }
    prev.swap(cur);
    prev_len.swap(cur_len);
    prev_alt.swap(cur_alt);
    prev_start.swap(cur_start);
  }

  CostOnly r;
  r.end = pick_end(prev.data(), cols, kind);
  r.cost = prev[r.end];
  r.length = prev_len[r.end];
  r.alt_length = prev_alt[r.end];
  r.start = prev_start[r.end];
  return r;
}

#if defined(__AVX512F__)

// Wavefront over strips of 8 * V rows: lane r of vector v handles row
// i0 + 8v + r and at step t sits on column t - 8v - r, so its up/diag
// predecessors are the lane below one and two steps back. Lane 0 of vector 0
// reads the previous strip's last row. Decisions and arithmetic are the same
// as cost_only_scalar, cell by cell.
template <int V, bool TrackStart, bool TrackAlt>
CostOnly cost_only_avx512(RowSource& src, std::size_t rows, std::size_t cols, AlignmentKind kind) {
  constexpr std::size_t kLanes = 8;
  constexpr std::size_t kStrip = kLanes * V;
  static_assert(kStrip <= kStripRows);
  // Row buffers are offset by one so index 0 is the virtual column -1.
  std::vector<double> prev_d(cols + 1), next_d(cols + 1);
  std::vector<std::int64_t> prev_len(cols + 1, 0), next_len(cols + 1, 0);
  std::vector<std::int64_t> prev_alt(cols + 1, 0), next_alt(cols + 1, 0);
  std::vector<std::int64_t> prev_start(cols + 1, 0), next_start(cols + 1, 0);

  // Virtual row -1: full alignment may only enter through (-1, -1); a
  // subsequence may enter anywhere, starting at the column it enters.
  if (kind == AlignmentKind::full) {
    std::fill(prev_d.begin(), prev_d.end(), kInf);
    prev_d[0] = 0.0;
  } else {
    std::fill(prev_d.begin(), prev_d.end(), 0.0);
    for (std::size_t c = 0; c <= cols; ++c) prev_start[c] = static_cast<std::int64_t>(c);
  }

  const __m512d inf = _mm512_set1_pd(kInf);
  const __m512i one = _mm512_set1_epi64(1);
  const __m512i lane_ids = _mm512_set_epi64(7, 6, 5, 4, 3, 2, 1, 0);
  const auto cols_i = static_cast<std::int64_t>(cols);
  alignas(64) double out_d[kLanes];
  alignas(64) std::int64_t out_len[kLanes], out_alt[kLanes], out_start[kLanes];

  auto shift_pd = [](__m512d v, __m512d below) {
    return _mm512_castsi512_pd(_mm512_alignr_epi64(_mm512_castpd_si512(v), _mm512_castpd_si512(below), 7));
  };

  for (std::size_t i0 = 0; i0 < rows; i0 += kStrip) {
    const std::size_t nr = std::min(kStrip, rows - i0);
    const std::size_t last_v = (nr - 1) / kLanes;
    const std::size_t last_lane = (nr - 1) % kLanes;
    const double* strip = src.rows(i0, nr);

    __m512i rel[V];  // row offset of each lane within the strip
    __m512i base[V];
    __mmask8 row_ok[V];
    __m512d d1[V], d2[V];
    __m512i len1[V], len2[V], alt1[V], alt2[V], st1[V], st2[V];
    for (int v = 0; v < V; ++v) {
      rel[v] = _mm512_add_epi64(lane_ids, _mm512_set1_epi64(static_cast<std::int64_t>(kLanes) * v));
      // Gather base per lane within the strip: rel * cols - rel, plus t at each step.
      base[v] = _mm512_sub_epi64(_mm512_mullo_epi64(rel[v], _mm512_set1_epi64(cols_i)), rel[v]);
      const std::size_t first = kLanes * static_cast<std::size_t>(v);
      const std::size_t live = nr > first ? std::min(kLanes, nr - first) : 0;
      row_ok[v] = static_cast<__mmask8>((1u << live) - 1u);
      d1[v] = d2[v] = inf;
      len1[v] = len2[v] = alt1[v] = alt2[v] = st1[v] = st2[v] = _mm512_setzero_si512();
    }

    const std::size_t steps = cols + nr - 1;
    for (std::size_t t = 0; t < steps; ++t) {
      const auto t_i = static_cast<std::int64_t>(t);
      const __m512i tv = _mm512_set1_epi64(t_i);
      // Lane 0 of vector 0 reads the previous strip: up = column t, diag = column t - 1.
      const std::size_t up_ix = std::min(t, cols - 1) + 1;
      const std::size_t diag_ix = std::min(t, cols);
      __m512d below_up = _mm512_set1_pd(prev_d[up_ix]);
      __m512d below_diag = _mm512_set1_pd(prev_d[diag_ix]);
      __m512i below_up_len = _mm512_set1_epi64(prev_len[up_ix]);
      __m512i below_diag_len = _mm512_set1_epi64(prev_len[diag_ix]);
      __m512i below_up_alt = _mm512_setzero_si512(), below_diag_alt = below_up_alt;
      __m512i below_up_st = below_up_alt, below_diag_st = below_up_alt;
      if constexpr (TrackAlt) {
        below_up_alt = _mm512_set1_epi64(prev_alt[up_ix]);
        below_diag_alt = _mm512_set1_epi64(prev_alt[diag_ix]);
      }
      if constexpr (TrackStart) {
        below_up_st = _mm512_set1_epi64(prev_start[up_ix]);
        below_diag_st = _mm512_set1_epi64(prev_start[diag_ix]);
      }

      for (int v = 0; v < V; ++v) {
        const __m512i col = _mm512_sub_epi64(tv, rel[v]);
        const __mmask8 ok = row_ok[v] & _mm512_cmpge_epi64_mask(col, _mm512_setzero_si512()) &
                            _mm512_cmplt_epi64_mask(col, _mm512_set1_epi64(cols_i));
        const __m512d cell =
            _mm512_mask_i64gather_pd(_mm512_setzero_pd(), ok, _mm512_add_epi64(base[v], tv), strip, 8);

        const __m512d up = shift_pd(d1[v], below_up);
        const __m512d diag = shift_pd(d2[v], below_diag);
        const __m512d left = d1[v];
        const __mmask8 take_up = _mm512_cmp_pd_mask(up, diag, _CMP_LT_OQ);
        const __m512d vert = _mm512_mask_blend_pd(take_up, diag, up);
        const __mmask8 take_left = _mm512_cmp_pd_mask(left, vert, _CMP_LT_OQ);
        const __m512d best = _mm512_mask_blend_pd(take_left, vert, left);
        const __m512d d = _mm512_mask_blend_pd(ok, inf, _mm512_add_pd(cell, best));

        const __m512i up_len = _mm512_alignr_epi64(len1[v], below_up_len, 7);
        const __m512i diag_len = _mm512_alignr_epi64(len2[v], below_diag_len, 7);
        __m512i len = _mm512_mask_blend_epi64(take_up, diag_len, up_len);
        len = _mm512_add_epi64(_mm512_mask_blend_epi64(take_left, len, len1[v]), one);

        __m512i st = _mm512_setzero_si512();
        if constexpr (TrackStart) {
          const __m512i up_st = _mm512_alignr_epi64(st1[v], below_up_st, 7);
          const __m512i diag_st = _mm512_alignr_epi64(st2[v], below_diag_st, 7);
          st = _mm512_mask_blend_epi64(take_up, diag_st, up_st);
          st = _mm512_mask_blend_epi64(take_left, st, st1[v]);
        }
        __m512i alt = _mm512_setzero_si512();
        if constexpr (TrackAlt) {
          const __m512i up_alt = _mm512_alignr_epi64(alt1[v], below_up_alt, 7);
          const __m512i diag_alt = _mm512_alignr_epi64(alt2[v], below_diag_alt, 7);
          const __mmask8 alt_left = _mm512_cmp_pd_mask(left, diag, _CMP_LT_OQ);
          const __m512d horiz = _mm512_mask_blend_pd(alt_left, diag, left);
          const __mmask8 alt_up = _mm512_cmp_pd_mask(up, horiz, _CMP_LT_OQ);
          alt = _mm512_mask_blend_epi64(alt_left, diag_alt, alt1[v]);
          alt = _mm512_add_epi64(_mm512_mask_blend_epi64(alt_up, alt, up_alt), one);
        }

        // The next vector up reads this one's previous-step values.
        below_up = d1[v];
        below_diag = d2[v];
        below_up_len = len1[v];
        below_diag_len = len2[v];
        d2[v] = d1[v];
        d1[v] = d;
        len2[v] = len1[v];
        len1[v] = len;
        if constexpr (TrackAlt) {
          below_up_alt = alt1[v];
          below_diag_alt = alt2[v];
          alt2[v] = alt1[v];
          alt1[v] = alt;
        }
        if constexpr (TrackStart) {
          below_up_st = st1[v];
          below_diag_st = st2[v];
          st2[v] = st1[v];
          st1[v] = st;
        }
      }

      // The strip's last row feeds the next strip.
      const std::int64_t last_col = t_i - static_cast<std::int64_t>(nr - 1);
      if (last_col >= 0 && last_col < cols_i) {
        const auto c = static_cast<std::size_t>(last_col) + 1;
        _mm512_store_pd(out_d, d1[last_v]);
        _mm512_store_si512(out_len, len1[last_v]);
        next_d[c] = out_d[last_lane];
        next_len[c] = out_len[last_lane];
        if constexpr (TrackAlt) {
          _mm512_store_si512(out_alt, alt1[last_v]);
          next_alt[c] = out_alt[last_lane];
        }
        if constexpr (TrackStart) {
          _mm512_store_si512(out_start, st1[last_v]);
          next_start[c] = out_start[last_lane];
        }
      }
    }
    // Column -1 is unreachable for every real row.
    next_d[0] = kInf;
    next_len[0] = next_alt[0] = next_start[0] = 0;
    prev_d.swap(next_d);
    prev_len.swap(next_len);
    prev_alt.swap(next_alt);
    prev_start.swap(next_start);
  }

  CostOnly r;
  r.end = pick_end(prev_d.data() + 1, cols, kind);
  r.cost = prev_d[r.end + 1];
  r.length = static_cast<std::size_t>(prev_len[r.end + 1]);
  r.alt_length = static_cast<std::size_t>(prev_alt[r.end + 1]);
  r.start = static_cast<std::size_t>(prev_start[r.end + 1]);
  return r;
}

#endif

#if defined(__AVX512F__)
template <int V>
CostOnly cost_only_strips(RowSource& src, std::size_t rows, std::size_t cols, AlignmentKind kind, bool alt) {
  if (kind == AlignmentKind::subsequence) return cost_only_avx512<V, true, false>(src, rows, cols, kind);
  if (alt) return cost_only_avx512<V, false, true>(src, rows, cols, kind);
  return cost_only_avx512<V, false, false>(src, rows, cols, kind);
}
#endif

CostOnly cost_only(RowSource& src, std::size_t rows, std::size_t cols, AlignmentKind kind, [[maybe_unused]] bool alt = false) {
#if defined(__AVX512F__)
  // Several vectors per strip keep independent dependency chains in flight;
  // short queries use fewer so lanes are not wasted on padding.
  if (cols >= 8) {
    switch (std::min<std::size_t>(4, (rows + 7) / 8)) {
      case 1: return cost_only_strips<1>(src, rows, cols, kind, alt);
      case 2: return cost_only_strips<2>(src, rows, cols, kind, alt);
      case 3: return cost_only_strips<3>(src, rows, cols, kind, alt);
      default: return cost_only_strips<4>(src, rows, cols, kind, alt);
    }
  }
#endif
  return cost_only_scalar(src, rows, cols, kind);
}

AlignmentResult align_cost_only(std::span<const double> dist, std::size_t rows, std::size_t cols,
                                AlignmentKind kind) {
  RowSource src(dist, cols);
  const CostOnly c = cost_only(src, rows, cols, kind);
  AlignmentResult r;
  r.kind = kind;
  r.cost = c.cost;
  r.path_length = c.length;
  r.normalized_cost = r.cost / static_cast<double>(r.path_length);
  r.match_start = c.start;
  r.match_end = c.end;
  return r;
}

}  // namespace

FullCost full_cost_both(std::span<const double> dist, std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) throw Error(ErrorCode::EmptySequence, "cannot align an empty sequence");
  RowSource src(dist, cols);
  const CostOnly c = cost_only(src, rows, cols, AlignmentKind::full, true);
  return FullCost{c.cost, c.length, c.alt_length};
}

FullCost full_cost_both(const RowFill& fill, std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) throw Error(ErrorCode::EmptySequence, "cannot align an empty sequence");
  RowSource src(fill, cols);
  const CostOnly c = cost_only(src, rows, cols, AlignmentKind::full, true);
  return FullCost{c.cost, c.length, c.alt_length};
}

namespace {

AlignmentResult align_with_path(std::span<const double> dist, std::size_t rows, std::size_t cols,
                                AlignmentKind kind) {
  std::vector<double> acc(rows * cols, kInf);
  std::vector<std::uint8_t> move(rows * cols, kStart);
  auto at = [cols](std::size_t i, std::size_t j) { return i * cols + j; };

  acc[0] = dist[0];
  for (std::size_t j = 1; j < cols; ++j) {
    if (kind == AlignmentKind::full) {
      acc[j] = dist[j] + acc[j - 1];
      move[j] = kLeft;
    } else {
      acc[j] = dist[j];
    }
  }
  for (std::size_t i = 1; i < rows; ++i) {
    acc[at(i, 0)] = dist[at(i, 0)] + acc[at(i - 1, 0)];
    move[at(i, 0)] = kUp;
    for (std::size_t j = 1; j < cols; ++j) {
      const double diag = acc[at(i - 1, j - 1)];
      const double up = acc[at(i - 1, j)];
      const double left = acc[at(i, j - 1)];
      const Move m = pick(diag, up, left);
      const double best = m == kDiag ? diag : (m == kUp ? up : left);
      acc[at(i, j)] = dist[at(i, j)] + best;
      move[at(i, j)] = m;
    }
  }

  std::size_t end = cols - 1;
  if (kind == AlignmentKind::subsequence) {
    end = 0;
    for (std::size_t j = 1; j < cols; ++j) {
      if (acc[at(rows - 1, j)] < acc[at(rows - 1, end)]) end = j;
    }
  }

  AlignmentResult r;
  r.kind = kind;
  r.cost = acc[at(rows - 1, end)];
  std::size_t i = rows - 1, j = end;
  for (;;) {
    r.path.push_back({i, j});
    const auto m = static_cast<Move>(move[at(i, j)]);
    if (m == kStart) break;
    if (m == kDiag) {
      --i;
      --j;
    } else if (m == kUp) {
      --i;
    } else {
      --j;
    }
  }
  std::reverse(r.path.begin(), r.path.end());
  r.path_length = r.path.size();
  r.normalized_cost = r.cost / static_cast<double>(r.path_length);
  r.match_start = r.path.front().candidate;
  r.match_end = r.path.back().candidate;
  return r;
}

}  // namespace

AlignmentResult align(std::span<const double> distances, std::size_t rows, std::size_t cols, AlignmentKind kind,
                      PathMode mode) {
  if (rows == 0 || cols == 0) throw Error(ErrorCode::EmptySequence, "cannot align an empty sequence");
  if (distances.size() != rows * cols) throw Error(ErrorCode::DimensionMismatch, "distance buffer shape");
  return mode == PathMode::with_path ? align_with_path(distances, rows, cols, kind)
                                     : align_cost_only(distances, rows, cols, kind);
}

AlignmentResult align(const DistanceMatrix& dm, AlignmentKind kind, PathMode mode) {
  return align(dm.entries(), dm.rows(), dm.cols(), kind, mode);
}

AlignmentResult dtw(const SnippetSequence& q, const SnippetSequence& d, PathMode mode) {
  return align(distance_matrix(q, d), AlignmentKind::full, mode);
}

AlignmentResult sdtw(const SnippetSequence& fragment, const SnippetSequence& full, PathMode mode) {
  return align(distance_matrix(fragment, full), AlignmentKind::subsequence, mode);
}

void sort_by_cost(std::vector<RankedItem>& items) {
  std::sort(items.begin(), items.end(), [](const RankedItem& a, const RankedItem& b) {
    if (a.score != b.score) return a.score < b.score;
    return a.piece_id < b.piece_id;
  });
}

RankedList rank_by_alignment(const SnippetSequence& q, const Corpus& corpus, AlignmentKind mode,
                             Direction direction, unsigned threads) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot rank against an empty corpus");
  if (q.dim() != corpus.dim()) {
    throw Error(ErrorCode::DimensionMismatch,
                "query dim " + std::to_string(q.dim()) + " vs corpus dim " + std::to_string(corpus.dim()));
  }
  const Modality side = candidate_modality(direction);
  // Surface MissingView before any work is spent.
  for (const auto& p : corpus.pieces()) (void)p.view(side);

  RankedList rl;
  rl.query_id = q.piece_id();
  rl.order = ScoreOrder::ascending_cost;
  rl.items.resize(corpus.size());
  parallel_for(corpus.size(), threads, [&](std::size_t i) {
    const Piece& p = corpus[i];
    const SnippetSequence& cand = p.view(side);
    const CandidateBlock block(cand.data(), cand.size(), cand.dim());
    const RowFill fill = [&](std::size_t first, std::size_t count, std::span<double> out) {
      block.distances(q.data().subspan(first * q.dim(), count * q.dim()), count, out);
    };
    RowSource src(fill, cand.size());
    const CostOnly c = cost_only(src, q.size(), cand.size(), mode);
    rl.items[i] = RankedItem{p.id, c.cost / static_cast<double>(c.length)};
  });
  sort_by_cost(rl.items);
  return rl;
}

}  // namespace pieceid
