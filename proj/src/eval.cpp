#include "pieceid/eval.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>

#include "pieceid/error.hpp"
#include "pieceid/parallel.hpp"
#include "pieceid/voting.hpp"

namespace pieceid {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::vote: return "vote";
    case Method::dtw: return "dtw";
    case Method::sdtw: return "sdtw";
    case Method::fingerprint: return "fingerprint";
  }
  return "unknown";
}

Method parse_method(std::string_view s) {
  if (s == "vote") return Method::vote;
  if (s == "dtw") return Method::dtw;
  if (s == "sdtw") return Method::sdtw;
  if (s == "fingerprint") return Method::fingerprint;
  throw Error(ErrorCode::InvalidConfig, "unknown method '" + std::string(s) + "'");
}

std::size_t rank_of_truth(const RankedList& rl) {
  if (!rl.truth_id) throw Error(ErrorCode::TruthMissing, "ranked list for '" + rl.query_id + "' has no truth id");
  for (std::size_t i = 0; i < rl.total(); ++i) {
    if (rl.at(i) == *rl.truth_id) return i + 1;
  }
  throw Error(ErrorCode::TruthMissing, "truth '" + *rl.truth_id + "' not in ranked list for '" + rl.query_id + "'");
}

EvalReport metrics(const std::vector<std::size_t>& ranks, const std::vector<std::size_t>& ks, std::size_t n_corpus) {
  if (ranks.empty()) throw Error(ErrorCode::EmptyRanks, "no ranks to evaluate");
  EvalReport rep;
  rep.ranks = ranks;
  rep.n_queries = ranks.size();
  rep.n_corpus = n_corpus;
  double rr = 0.0;
  for (std::size_t r : ranks) {
    if (r < 1 || r > n_corpus) {
      throw Error(ErrorCode::InvalidConfig, "rank " + std::to_string(r) + " outside [1, " + std::to_string(n_corpus) + "]");
    }
    rr += 1.0 / static_cast<double>(r);
  }
  rep.mrr = rr / static_cast<double>(ranks.size());
  for (std::size_t k : ks) {
    const auto c = static_cast<std::size_t>(std::count_if(ranks.begin(), ranks.end(), [k](std::size_t r) { return r <= k; }));
    rep.recall_at[k] = RecallAt{c, static_cast<double>(c) / static_cast<double>(ranks.size())};
  }
  std::vector<std::size_t> sorted = ranks;
  std::sort(sorted.begin(), sorted.end());
  rep.median_rank = sorted[(sorted.size() - 1) / 2];
  return rep;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

constexpr double kFar = std::numeric_limits<double>::infinity();

void require_views(const Corpus& corpus) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "corpus is empty");
  for (const auto& p : corpus.pieces()) {
    (void)p.view(Modality::score);
    (void)p.view(Modality::audio);
  }
}

}  // namespace

EvalReport run_piece_identification(const Corpus& corpus, Method method, Direction direction,
                                    const IdentifyOptions& opts) {
  require_views(corpus);
  const Modality q_side = query_modality(direction);
  const Modality c_side = candidate_modality(direction);

  std::optional<SnippetIndex> snippets;
  std::optional<FingerprintIndex> prints;
  if (method == Method::vote) snippets = SnippetIndex::build(corpus, c_side);
  if (method == Method::fingerprint) prints = FingerprintIndex::build(corpus, c_side, opts.fingerprint);

  std::vector<std::size_t> ranks(corpus.size());
  double total_seconds = 0.0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const SnippetSequence& q = corpus[i].view(q_side);
    const auto t0 = Clock::now();
    RankedList rl;
    switch (method) {
      case Method::vote: rl = vote_rank(q, *snippets); break;
      case Method::dtw: rl = rank_by_alignment(q, corpus, AlignmentKind::full, direction, opts.threads); break;
      case Method::sdtw: rl = rank_by_alignment(q, corpus, AlignmentKind::subsequence, direction, opts.threads); break;
      case Method::fingerprint: rl = fingerprint_rank(q, *prints); break;
    }
    total_seconds += seconds_since(t0);
    rl.truth_id = corpus[i].id;
    complete_ranking(rl, corpus.ids());
    ranks[i] = rank_of_truth(rl);
  }
  EvalReport rep = metrics(ranks, opts.ks, corpus.size());
  rep.method = std::string(to_string(method));
  rep.direction = direction;
  rep.mean_query_seconds = total_seconds / static_cast<double>(corpus.size());
  return rep;
}

std::vector<EvalReport> run_identification_suite(const Corpus& corpus, const IdentifyOptions& opts) {
  require_views(corpus);
  const std::size_t n = corpus.size();
  const std::size_t dim = corpus.dim();

  // Slot order = piece-id order, which is the snippet index order.
  std::vector<std::size_t> slot(n);
  std::iota(slot.begin(), slot.end(), 0);
  std::sort(slot.begin(), slot.end(), [&](std::size_t a, std::size_t b) { return corpus[a].id < corpus[b].id; });
  std::vector<std::string> slot_ids;
  for (std::size_t s : slot) slot_ids.push_back(corpus[s].id);

  // Nearest neighbour state per query snippet: (distance, slot of its piece).
  struct Best {
    double d = 0.0;
    std::uint32_t slot = 0;
    bool set = false;
  };
  std::vector<std::vector<Best>> nn_a2s(n), nn_s2a(n);  // by corpus index of the query piece
  for (std::size_t i = 0; i < n; ++i) {
    nn_a2s[i].resize(corpus[i].view(Modality::audio).size());
    nn_s2a[i].resize(corpus[i].view(Modality::score).size());
  }
  std::vector<double> cost_a2s(n * n), cost_s2a(n * n);  // [query piece][candidate piece], corpus indices

  // Audio pieces (outer) and score pieces (inner) both walk in slot order and
  // every min uses strict less, so the first minimum in (slot, position)
  // order wins, as in the linear scan.
  std::vector<double> row_min, col_min;
  for (std::size_t as = 0; as < n; ++as) {
    const std::size_t a = slot[as];
    const SnippetSequence& audio = corpus[a].view(Modality::audio);
    for (std::size_t ss = 0; ss < n; ++ss) {
      const std::size_t s = slot[ss];
      const SnippetSequence& score = corpus[s].view(Modality::score);
      const std::size_t rows = audio.size(), cols = score.size();
      const CandidateBlock cand(score.data(), cols, dim);
      row_min.assign(rows, kFar);
      col_min.assign(cols, kFar);
      const RowFill fill = [&](std::size_t first, std::size_t count, std::span<double> out) {
        cand.distances(audio.data().subspan(first * dim, count * dim), count, out);
        fold_minima(out, count, cols, std::span(row_min).subspan(first, count), col_min);
      };

      // The transposed problem has the same cost; only its tie-broken path
      // length may differ.
      const FullCost fc = full_cost_both(fill, rows, cols);
      cost_a2s[a * n + s] = fc.cost / static_cast<double>(fc.path_length);
      cost_s2a[s * n + a] = fc.cost / static_cast<double>(fc.transposed_path_length);

      auto& qa = nn_a2s[a];
      for (std::size_t r = 0; r < rows; ++r) {
        if (!qa[r].set || row_min[r] < qa[r].d) qa[r] = {row_min[r], static_cast<std::uint32_t>(ss), true};
      }
      auto& qs = nn_s2a[s];
      for (std::size_t c = 0; c < cols; ++c) {
        if (!qs[c].set || col_min[c] < qs[c].d) qs[c] = {col_min[c], static_cast<std::uint32_t>(as), true};
      }
    }
  }

  auto report = [&](std::vector<std::size_t> ranks, Method m, Direction d) {
    EvalReport rep = metrics(ranks, opts.ks, n);
    rep.method = std::string(to_string(m));
    rep.direction = d;
    return rep;
  };

  std::vector<EvalReport> out;
  for (Direction d : {Direction::a2s, Direction::s2a}) {
    const auto& nn = d == Direction::a2s ? nn_a2s : nn_s2a;
    std::vector<std::size_t> ranks(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<VoteTally> tallies(n);
      for (const auto& b : nn[i]) tallies[b.slot].distances.push_back(b.d);
      RankedList rl = rank_votes(tallies, slot_ids, corpus[i].view(query_modality(d)).piece_id());
      rl.truth_id = corpus[i].id;
      ranks[i] = rank_of_truth(rl);
    }
    out.push_back(report(std::move(ranks), Method::vote, d));
  }
  for (Direction d : {Direction::a2s, Direction::s2a}) {
    const auto& cost = d == Direction::a2s ? cost_a2s : cost_s2a;
    std::vector<std::size_t> ranks(n);
    for (std::size_t i = 0; i < n; ++i) {
      RankedList rl;
      rl.order = ScoreOrder::ascending_cost;
      for (std::size_t j = 0; j < n; ++j) rl.items.push_back({corpus[j].id, cost[i * n + j]});
      sort_by_cost(rl.items);
      rl.truth_id = corpus[i].id;
      ranks[i] = rank_of_truth(rl);
    }
    out.push_back(report(std::move(ranks), Method::dtw, d));
  }
  for (Direction d : {Direction::a2s, Direction::s2a}) {
    const auto index = FingerprintIndex::build(corpus, candidate_modality(d), opts.fingerprint);
    std::vector<std::size_t> ranks(n);
    parallel_for(n, opts.threads, [&](std::size_t i) {
      RankedList rl = fingerprint_rank(corpus[i].view(query_modality(d)), index);
      rl.truth_id = corpus[i].id;
      ranks[i] = rank_of_truth(rl);
    });
    out.push_back(report(std::move(ranks), Method::fingerprint, d));
  }
  return out;
}

std::vector<FragmentPoint> run_fragment_experiment(const Corpus& corpus, const std::vector<std::size_t>& lengths,
                                                   Direction direction, const FragmentOptions& opts) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "corpus is empty");
  if (opts.n_queries == 0) throw Error(ErrorCode::NonPositive, "n_queries must be positive");
  const Modality q_side = query_modality(direction);
  std::size_t shortest = std::numeric_limits<std::size_t>::max();
  for (const auto& p : corpus.pieces()) {
    shortest = std::min(shortest, p.view(q_side).size());
    (void)p.view(candidate_modality(direction));
  }
  for (std::size_t len : lengths) {
    if (len == 0) throw Error(ErrorCode::NonPositive, "fragment length must be positive");
    if (len > shortest) {
      throw Error(ErrorCode::FragmentTooLong, "fragment length " + std::to_string(len) +
                                                  " exceeds the shortest query view (" + std::to_string(shortest) + ")");
    }
  }

  std::vector<FragmentPoint> out;
  for (std::size_t len : lengths) {
    std::seed_seq seq{opts.seed, static_cast<std::uint64_t>(len)};
    std::mt19937_64 rng(seq);
    std::uniform_int_distribution<std::size_t> pick(0, corpus.size() - 1);
    std::vector<Fragment> queries;
    queries.reserve(opts.n_queries);
    for (std::size_t q = 0; q < opts.n_queries; ++q) {
      const std::size_t piece = pick(rng);
      queries.push_back(sample_fragment(corpus[piece].view(q_side), len, rng));
    }
    std::vector<std::size_t> ranks(opts.n_queries);
    std::vector<double> seconds(opts.n_queries);
    parallel_for(opts.n_queries, opts.threads, [&](std::size_t q) {
      const auto t0 = Clock::now();
      RankedList rl = rank_by_alignment(queries[q].sequence, corpus, AlignmentKind::subsequence, direction);
      seconds[q] = seconds_since(t0);
      rl.truth_id = queries[q].piece_id;
      ranks[q] = rank_of_truth(rl);
    });
    FragmentPoint pt;
    pt.length = len;
    pt.report = metrics(ranks, opts.ks, corpus.size());
    pt.report.method = "sdtw";
    pt.report.direction = direction;
    if (opts.threads <= 1) {
      pt.report.mean_query_seconds =
          std::accumulate(seconds.begin(), seconds.end(), 0.0) / static_cast<double>(seconds.size());
    }
    out.push_back(std::move(pt));
  }
  return out;
}

std::size_t default_scale_query_length(Direction direction, double snippets_per_system) {
  return direction == Direction::a2s ? seconds_to_snippets(50.0) : systems_to_snippets(4, snippets_per_system);
}

std::vector<ScalePoint> run_scalability_experiment(const Corpus& corpus, const std::vector<std::size_t>& sizes,
                                                   Direction direction, const ScaleOptions& opts) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "corpus is empty");
  if (opts.n_queries == 0 || opts.repetitions == 0) {
    throw Error(ErrorCode::NonPositive, "n_queries and repetitions must be positive");
  }
  if (opts.query_length == 0) throw Error(ErrorCode::NonPositive, "query_length must be positive");
  const Modality q_side = query_modality(direction);
  for (std::size_t size : sizes) {
    if (size == 0) throw Error(ErrorCode::NonPositive, "sub-corpus size must be positive");
    if (size > corpus.size()) {
      throw Error(ErrorCode::SizeTooLarge,
                  "size " + std::to_string(size) + " exceeds corpus of " + std::to_string(corpus.size()));
    }
  }
  for (const auto& p : corpus.pieces()) {
    if (p.view(q_side).size() < opts.query_length) {
      throw Error(ErrorCode::FragmentTooLong, "piece '" + p.id + "' is shorter than the query length " +
                                                  std::to_string(opts.query_length));
    }
  }

  std::vector<ScalePoint> out;
  for (std::size_t size : sizes) {
    ScalePoint pt;
    pt.size = size;
    double seconds = 0.0;
    std::size_t timed = 0;
    for (std::size_t rep = 0; rep < opts.repetitions; ++rep) {
      std::seed_seq seq{opts.seed, static_cast<std::uint64_t>(size), static_cast<std::uint64_t>(rep)};
      std::mt19937_64 rng(seq);
      std::vector<std::size_t> members(corpus.size());
      std::iota(members.begin(), members.end(), 0);
      std::shuffle(members.begin(), members.end(), rng);
      members.resize(size);
      std::sort(members.begin(), members.end());
      const Corpus sub = corpus.subset(members);

      std::uniform_int_distribution<std::size_t> pick(0, size - 1);
      std::vector<std::size_t> ranks;
      ranks.reserve(opts.n_queries);
      for (std::size_t q = 0; q < opts.n_queries; ++q) {
        const Fragment frag = sample_fragment(sub[pick(rng)].view(q_side), opts.query_length, rng);
        const auto t0 = Clock::now();
        RankedList rl = rank_by_alignment(frag.sequence, sub, AlignmentKind::subsequence, direction);
        seconds += seconds_since(t0);
        ++timed;
        rl.truth_id = frag.piece_id;
        ranks.push_back(rank_of_truth(rl));
      }
      pt.mrr_per_repetition.push_back(metrics(ranks, {1}, size).mrr);
    }
    pt.mean_mrr = std::accumulate(pt.mrr_per_repetition.begin(), pt.mrr_per_repetition.end(), 0.0) /
                  static_cast<double>(pt.mrr_per_repetition.size());
    pt.mean_query_seconds = seconds / static_cast<double>(timed);
    out.push_back(std::move(pt));
  }
  return out;
}

double linear_fit_r2(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCode::InvalidConfig, "line fit needs >= 2 paired points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw Error(ErrorCode::InvalidConfig, "line fit needs distinct x values");
  if (syy == 0.0) return 1.0;
  return (sxy * sxy) / (sxx * syy);
}

}  // namespace pieceid
