#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pieceid/alignment.hpp"
#include "pieceid/embedding.hpp"
#include "pieceid/fingerprint.hpp"
#include "pieceid/ranking.hpp"
#include "pieceid/synth.hpp"

namespace pieceid {

enum class Method { vote, dtw, sdtw, fingerprint };

std::string_view to_string(Method m);
Method parse_method(std::string_view s);

struct RecallAt {
  std::size_t count = 0;
  double fraction = 0.0;
  bool operator==(const RecallAt&) const = default;
};

struct EvalReport {
  std::string method;
  Direction direction = Direction::a2s;
  std::vector<std::size_t> ranks;  // 1-based rank of the truth, per query
  std::map<std::size_t, RecallAt> recall_at;
  double mrr = 0.0;
  std::size_t median_rank = 0;
  std::size_t n_queries = 0;
  std::size_t n_corpus = 0;
  /// Mean wall-clock seconds of the ranking call; absent when ranking was
  /// done in a batch that cannot attribute time to single queries.
  std::optional<double> mean_query_seconds;
};

/// 1-based position of rl.truth_id in the completed order (items, then unscored).
std::size_t rank_of_truth(const RankedList& rl);

/// recall@K = |{r <= K}| / n, MRR = mean(1/r), MR = lower median.
EvalReport metrics(const std::vector<std::size_t>& ranks, const std::vector<std::size_t>& ks, std::size_t n_corpus);

inline const std::vector<std::size_t> kDefaultRecallKs = {1, 5, 10};

struct IdentifyOptions {
  FingerprintParams fingerprint;
  std::vector<std::size_t> ks = kDefaultRecallKs;
  unsigned threads = 1;
};

/// Queries every piece's full view against the whole corpus. Method::sdtw is
/// accepted and aligns full pieces with a free candidate boundary.
EvalReport run_piece_identification(const Corpus& corpus, Method method, Direction direction,
                                    const IdentifyOptions& opts = {});

/// vote, dtw and fingerprint in both directions from one pass over the
/// audio x score distance blocks. Ranks equal those of
/// run_piece_identification; timing is not attributed (left empty).
/// Reports come back ordered (vote, dtw, fingerprint) x (a2s, s2a).
std::vector<EvalReport> run_identification_suite(const Corpus& corpus, const IdentifyOptions& opts = {});

struct FragmentOptions {
  std::size_t n_queries = 1500;
  std::uint64_t seed = 0;
  std::vector<std::size_t> ks = kDefaultRecallKs;
  unsigned threads = 1;
};

struct FragmentPoint {
  std::size_t length = 0;  // snippets
  EvalReport report;
};

/// For every length: n_queries random fragments of random pieces' query
/// views, each ranked with subsequence alignment against the candidate views.
std::vector<FragmentPoint> run_fragment_experiment(const Corpus& corpus, const std::vector<std::size_t>& lengths,
                                                   Direction direction, const FragmentOptions& opts = {});

struct ScaleOptions {
  std::size_t n_queries = 1000;
  std::size_t repetitions = 10;
  std::size_t query_length = 0;  // snippets, required; see default_scale_query_length
  std::uint64_t seed = 0;
};

struct ScalePoint {
  std::size_t size = 0;
  double mean_mrr = 0.0;
  double mean_query_seconds = 0.0;
  std::vector<double> mrr_per_repetition;
};

/// Default fixed fragment size: 50 s of audio (a2s) or four systems (s2a).
std::size_t default_scale_query_length(Direction direction, double snippets_per_system);

/// Per size and repetition: a random sub-corpus, n_queries fragments drawn
/// from it, ranked sequentially by subsequence alignment with each ranking
/// call timed on a monotonic clock.
std::vector<ScalePoint> run_scalability_experiment(const Corpus& corpus, const std::vector<std::size_t>& sizes,
                                                   Direction direction, const ScaleOptions& opts = {});

/// Least-squares line fit of y on x; returns R^2.
double linear_fit_r2(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace pieceid
