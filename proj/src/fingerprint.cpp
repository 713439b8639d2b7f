#include "pieceid/fingerprint.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "binio.hpp"
#include "pieceid/error.hpp"

namespace pieceid {

namespace {

constexpr char kMagic[5] = {'A', 'F', 'P', 'I', '1'};
constexpr unsigned kDeltaBits = 8;

}  // namespace

void FingerprintParams::validate() const {
  if (planes == 0 || planes > 28) throw Error(ErrorCode::InvalidConfig, "planes must be in [1, 28]");
  if (fan_out == 0) throw Error(ErrorCode::InvalidConfig, "fan_out must be positive");
  if (max_delta == 0 || max_delta > 255) throw Error(ErrorCode::InvalidConfig, "max_delta must be in [1, 255]");
}

std::vector<EmbeddingVector> make_planes(unsigned planes, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<EmbeddingVector> out;
  out.reserve(planes);
  for (unsigned p = 0; p < planes; ++p) {
    std::vector<double> v(dim);
    for (auto& x : v) x = gauss(rng);
    out.emplace_back(std::move(v));
  }
  return out;
}

std::uint32_t quantize(const EmbeddingVector& v, const std::vector<EmbeddingVector>& planes) {
  std::uint32_t code = 0;
  for (std::size_t b = 0; b < planes.size(); ++b) {
    if (planes[b].dim() != v.dim()) {
      throw Error(ErrorCode::DimensionMismatch, "plane dim " + std::to_string(planes[b].dim()) +
                                                    " vs vector dim " + std::to_string(v.dim()));
    }
    if (dot(v.values(), planes[b].values()) >= 0.0) code |= (1u << b);
  }
  return code;
}

FingerprintKey make_key(std::uint32_t anchor_code, std::uint32_t target_code, unsigned delta, unsigned planes) {
  return FingerprintKey{(static_cast<std::uint64_t>(anchor_code) << (planes + kDeltaBits)) |
                        (static_cast<std::uint64_t>(target_code) << kDeltaBits) | delta};
}

std::vector<KeyAt> build_fingerprints(const SnippetSequence& seq, const FingerprintParams& params,
                                      const std::vector<EmbeddingVector>& planes) {
  params.validate();
  std::vector<std::uint32_t> codes(seq.size());
  for (std::size_t t = 0; t < seq.size(); ++t) codes[t] = quantize(seq[t], planes);

  std::vector<KeyAt> keys;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    unsigned paired = 0;
    for (std::size_t u = t + 1; u < seq.size() && u - t <= params.max_delta && paired < params.fan_out; ++u, ++paired) {
      keys.push_back({make_key(codes[t], codes[u], static_cast<unsigned>(u - t), params.planes),
                      static_cast<std::uint32_t>(t)});
    }
  }
  return keys;
}

FingerprintIndex FingerprintIndex::build(const Corpus& corpus, Modality modality, const FingerprintParams& params) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot fingerprint an empty corpus");
  params.validate();
  FingerprintIndex idx;
  idx.params_ = params;
  idx.dim_ = corpus.dim();
  idx.planes_ = make_planes(params.planes, idx.dim_, params.seed);

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return corpus[a].id < corpus[b].id; });
  for (std::size_t slot = 0; slot < order.size(); ++slot) {
    const Piece& p = corpus[order[slot]];
    const auto keys = build_fingerprints(p.view(modality), params, idx.planes_);
    idx.piece_ids_.push_back(p.id);
    idx.keys_per_piece_.push_back(keys.size());
    for (const auto& k : keys) {
      idx.table_[k.key.code].push_back({static_cast<std::uint32_t>(slot), k.anchor});
      ++idx.postings_;
    }
  }
  return idx;
}

const std::vector<Posting>* FingerprintIndex::lookup(FingerprintKey key) const {
  const auto it = table_.find(key.code);
  return it == table_.end() ? nullptr : &it->second;
}

void FingerprintIndex::save(std::ostream& out) const {
  out.write(kMagic, sizeof(kMagic));
  binio::put<std::uint32_t>(out, params_.planes);
  binio::put<std::uint32_t>(out, params_.fan_out);
  binio::put<std::uint32_t>(out, params_.max_delta);
  binio::put<std::uint64_t>(out, params_.seed);
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(dim_));
  for (const auto& p : planes_) {
    for (double x : p.values()) binio::put<double>(out, x);
  }
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(piece_ids_.size()));
  for (std::size_t s = 0; s < piece_ids_.size(); ++s) {
    binio::put_string(out, piece_ids_[s]);
    binio::put<std::uint64_t>(out, keys_per_piece_[s]);
  }
  std::vector<std::uint64_t> keys;
  keys.reserve(table_.size());
  for (const auto& [k, _] : table_) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  binio::put<std::uint64_t>(out, keys.size());
  for (std::uint64_t k : keys) {
    const auto& list = table_.at(k);
    binio::put<std::uint64_t>(out, k);
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(list.size()));
    for (const auto& post : list) {
      binio::put<std::uint32_t>(out, post.piece);
      binio::put<std::uint32_t>(out, post.anchor);
    }
  }
}

FingerprintIndex FingerprintIndex::load(std::istream& in) {
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || !std::equal(magic, magic + sizeof(magic), kMagic)) {
    throw Error(ErrorCode::BadMagic, "not a fingerprint index");
  }
  FingerprintIndex idx;
  idx.params_.planes = binio::get<std::uint32_t>(in, "fingerprint params");
  idx.params_.fan_out = binio::get<std::uint32_t>(in, "fingerprint params");
  idx.params_.max_delta = binio::get<std::uint32_t>(in, "fingerprint params");
  idx.params_.seed = binio::get<std::uint64_t>(in, "fingerprint params");
  idx.params_.validate();
  idx.dim_ = binio::get<std::uint32_t>(in, "fingerprint dim");
  if (idx.dim_ == 0) throw Error(ErrorCode::DimensionMismatch, "fingerprint index with dim 0");
  for (unsigned p = 0; p < idx.params_.planes; ++p) {
    std::vector<double> v(idx.dim_);
    for (auto& x : v) x = binio::get<double>(in, "fingerprint planes");
    idx.planes_.emplace_back(std::move(v));
  }
  const auto n_pieces = binio::get<std::uint32_t>(in, "fingerprint pieces");
  for (std::uint32_t s = 0; s < n_pieces; ++s) {
    idx.piece_ids_.push_back(binio::get_string(in, "fingerprint piece id"));
    idx.keys_per_piece_.push_back(binio::get<std::uint64_t>(in, "fingerprint piece keys"));
  }
  const auto n_keys = binio::get<std::uint64_t>(in, "fingerprint table");
  for (std::uint64_t i = 0; i < n_keys; ++i) {
    const auto k = binio::get<std::uint64_t>(in, "fingerprint table");
    const auto n = binio::get<std::uint32_t>(in, "fingerprint postings");
    auto& list = idx.table_[k];
    list.reserve(n);
    for (std::uint32_t j = 0; j < n; ++j) {
      Posting post;
      post.piece = binio::get<std::uint32_t>(in, "fingerprint postings");
      post.anchor = binio::get<std::uint32_t>(in, "fingerprint postings");
      if (post.piece >= n_pieces) throw Error(ErrorCode::BadLength, "posting refers to unknown piece slot");
      list.push_back(post);
    }
    idx.postings_ += n;
  }
  return idx;
}

RankedList fingerprint_rank(const SnippetSequence& q, const FingerprintIndex& index) {
  if (index.pieces().empty() || index.posting_count() == 0) {
    throw Error(ErrorCode::EmptyIndex, "fingerprint index has no postings");
  }
  if (q.dim() != index.dim()) {
    throw Error(ErrorCode::DimensionMismatch,
                "query dim " + std::to_string(q.dim()) + " vs index dim " + std::to_string(index.dim()));
  }
  // (piece slot, offset) per collision; sorted runs give the offset histogram.
  std::vector<std::pair<std::uint32_t, std::int64_t>> hits;
  for (const auto& k : build_fingerprints(q, index.params(), index.planes())) {
    const auto* list = index.lookup(k.key);
    if (list == nullptr) continue;
    for (const auto& post : *list) {
      hits.emplace_back(post.piece, static_cast<std::int64_t>(post.anchor) - static_cast<std::int64_t>(k.anchor));
    }
  }
  std::sort(hits.begin(), hits.end());

  std::vector<std::size_t> peak(index.pieces().size(), 0);
  for (std::size_t i = 0; i < hits.size();) {
    std::size_t j = i;
    while (j < hits.size() && hits[j] == hits[i]) ++j;
    peak[hits[i].first] = std::max(peak[hits[i].first], j - i);
    i = j;
  }

  RankedList rl;
  rl.query_id = q.piece_id();
  rl.order = ScoreOrder::descending_score;
  for (std::size_t s = 0; s < peak.size(); ++s) {
    if (peak[s] > 0) rl.items.push_back({index.pieces()[s], static_cast<double>(peak[s])});
  }
  std::stable_sort(rl.items.begin(), rl.items.end(), [](const RankedItem& a, const RankedItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.piece_id < b.piece_id;
  });
  complete_ranking(rl, index.pieces());
  return rl;
}

}  // namespace pieceid
