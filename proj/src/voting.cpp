#include "pieceid/voting.hpp"

#include <algorithm>
#include <numeric>

#include "pieceid/error.hpp"

namespace pieceid {

SnippetIndex SnippetIndex::build(const Corpus& corpus, Modality modality) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot index an empty corpus");
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return corpus[a].id < corpus[b].id; });

  SnippetIndex idx;
  idx.modality_ = modality;
  idx.dim_ = corpus.dim();
  for (std::size_t slot = 0; slot < order.size(); ++slot) {
    const Piece& p = corpus[order[slot]];
    const SnippetSequence& seq = p.view(modality);
    idx.piece_ids_.push_back(p.id);
    idx.data_.insert(idx.data_.end(), seq.data().begin(), seq.data().end());
    for (std::size_t t = 0; t < seq.size(); ++t) {
      idx.piece_of_.push_back(static_cast<std::uint32_t>(slot));
      idx.position_.push_back(static_cast<std::uint32_t>(t));
    }
  }
  return idx;
}

SnippetHit nearest_snippet(const EmbeddingVector& x, const SnippetIndex& index) {
  if (index.size() == 0) throw Error(ErrorCode::EmptyIndex, "snippet index is empty");
  if (x.dim() != index.dim()) {
    throw Error(ErrorCode::DimensionMismatch,
                "query dim " + std::to_string(x.dim()) + " vs index dim " + std::to_string(index.dim()));
  }
  const EmbeddingVector u = normalize(x);
  std::size_t best = 0;
  double best_d = distance_from_dot(dot(u.values(), index.row(0)));
  for (std::size_t e = 1; e < index.size(); ++e) {
    const double d = distance_from_dot(dot(u.values(), index.row(e)));
    if (d < best_d) {
      best_d = d;
      best = e;
    }
  }
  return SnippetHit{index.piece_id(best), index.position(best), best_d};
}

RankedList rank_votes(const std::vector<VoteTally>& tallies, const std::vector<std::string>& piece_ids,
                      std::string query_id) {
  struct Scored {
    std::size_t slot;
    std::size_t votes;
    double mean;
  };
  std::vector<Scored> voted;
  for (std::size_t s = 0; s < tallies.size(); ++s) {
    if (tallies[s].distances.empty()) continue;
    std::vector<double> ds = tallies[s].distances;
    std::sort(ds.begin(), ds.end());
    double sum = 0.0;
    for (double d : ds) sum += d;
    voted.push_back({s, ds.size(), sum / static_cast<double>(ds.size())});
  }
  std::sort(voted.begin(), voted.end(), [&](const Scored& a, const Scored& b) {
    if (a.votes != b.votes) return a.votes > b.votes;
    if (a.mean != b.mean) return a.mean < b.mean;
    return piece_ids[a.slot] < piece_ids[b.slot];
  });

  RankedList rl;
  rl.query_id = std::move(query_id);
  rl.order = ScoreOrder::descending_score;
  for (const auto& v : voted) rl.items.push_back({piece_ids[v.slot], static_cast<double>(v.votes)});
  complete_ranking(rl, piece_ids);
  return rl;
}

RankedList vote_rank(const SnippetSequence& q, const SnippetIndex& index) {
  if (index.size() == 0) throw Error(ErrorCode::EmptyIndex, "snippet index is empty");
  if (q.dim() != index.dim()) {
    throw Error(ErrorCode::DimensionMismatch,
                "query dim " + std::to_string(q.dim()) + " vs index dim " + std::to_string(index.dim()));
  }
  const std::size_t n = q.size();
  std::vector<double> best_d(n, 0.0);
  std::vector<std::size_t> best_e(n, 0);

  // Blocked scan over index entries; within and across blocks entries are
  // visited in index order, so strict-less keeps the first minimum.
  constexpr std::size_t kChunk = 4096;
  std::vector<double> buf;
  for (std::size_t e0 = 0; e0 < index.size(); e0 += kChunk) {
    const std::size_t len = std::min(kChunk, index.size() - e0);
    buf.resize(n * len);
    cross_distances(q.data(), n, index.data().subspan(e0 * index.dim(), len * index.dim()), len, q.dim(), buf);
    for (std::size_t i = 0; i < n; ++i) {
      const double* r = buf.data() + i * len;
      std::size_t start = 0;
      if (e0 == 0) {
        best_d[i] = r[0];
        best_e[i] = 0;
        start = 1;
      }
      for (std::size_t e = start; e < len; ++e) {
        if (r[e] < best_d[i]) {
          best_d[i] = r[e];
          best_e[i] = e0 + e;
        }
      }
    }
  }

  std::vector<VoteTally> tallies(index.pieces().size());
  for (std::size_t i = 0; i < n; ++i) {
    tallies[index.piece_slot(best_e[i])].distances.push_back(best_d[i]);
  }
  return rank_votes(tallies, index.pieces(), q.piece_id());
}

}  // namespace pieceid
