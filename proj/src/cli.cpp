#include "pieceid/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>

#include <CLI11.hpp>

#include "pieceid/alignment.hpp"
#include "pieceid/error.hpp"
#include "pieceid/eval.hpp"
#include "pieceid/fingerprint.hpp"
#include "pieceid/io.hpp"
#include "pieceid/synth.hpp"
#include "pieceid/voting.hpp"

namespace pieceid {

namespace {

void add_synth_flags(CLI::App& app, SynthConfig& cfg) {
  app.add_option("--pieces", cfg.n_pieces, "Number of pieces")->capture_default_str();
  app.add_option("--dim", cfg.dim, "Embedding dimension")->capture_default_str();
  app.add_option("--score-len", cfg.mean_score_len, "Mean score snippets per piece")->capture_default_str();
  app.add_option("--audio-len", cfg.mean_audio_len, "Mean audio snippets per piece")->capture_default_str();
  app.add_option("--sigma", cfg.pair_noise_sigma, "Pair noise scale")->capture_default_str();
  app.add_option("--noise-correlation", cfg.noise_correlation, "Lag-one correlation of the noise")
      ->capture_default_str();
  app.add_option("--noise-spread", cfg.piece_noise_spread, "Log-scale spread of per-piece noise")
      ->capture_default_str();
  app.add_option("--warp-low", cfg.tempo_warp_low, "Lowest tempo stretch")->capture_default_str();
  app.add_option("--warp-high", cfg.tempo_warp_high, "Highest tempo stretch")->capture_default_str();
  app.add_option("--repeat-fraction", cfg.repeat_fraction, "Fraction of pieces with a played repeat")
      ->capture_default_str();
  app.add_option("--degenerate-fraction", cfg.degenerate_fraction, "Fraction of degenerate pieces")
      ->capture_default_str();
  app.add_flag("--attention", cfg.attention_mode, "Halve the pair noise");
  app.add_option("--seed", cfg.seed, "Corpus seed")->capture_default_str();
  app.add_option("--max-step", cfg.max_step_degrees, "Largest latent step in degrees")->capture_default_str();
  app.add_option("--length-spread", cfg.length_spread, "Relative spread of piece lengths")->capture_default_str();
  app.add_option("--systems-per-piece", cfg.systems_per_piece, "Score systems per piece")->capture_default_str();
}

void add_fingerprint_flags(CLI::App& app, FingerprintParams& fp) {
  app.add_option("--planes", fp.planes, "Fingerprint hyperplanes")->capture_default_str();
  app.add_option("--fan-out", fp.fan_out, "Fingerprint targets per anchor")->capture_default_str();
  app.add_option("--max-delta", fp.max_delta, "Fingerprint target window")->capture_default_str();
  app.add_option("--fp-seed", fp.seed, "Fingerprint hyperplane seed")->capture_default_str();
}

std::vector<Direction> directions_from(const std::string& flag) {
  if (flag == "both") return {Direction::a2s, Direction::s2a};
  return {parse_direction(flag)};
}

std::string optional_seconds(const std::optional<double>& s) { return s ? format_real(*s) : std::string(); }

std::vector<std::string> report_fields(const EvalReport& r, const std::vector<std::size_t>& ks) {
  std::vector<std::string> f;
  for (std::size_t k : ks) f.push_back(format_real(r.recall_at.at(k).fraction));
  f.push_back(format_real(r.mrr));
  f.push_back(std::to_string(r.median_rank));
  f.push_back(optional_seconds(r.mean_query_seconds));
  return f;
}

std::vector<std::string> report_header(const std::vector<std::size_t>& ks) {
  std::vector<std::string> h;
  for (std::size_t k : ks) h.push_back("r@" + std::to_string(k));
  h.insert(h.end(), {"mrr", "median_rank", "mean_query_seconds"});
  return h;
}

struct CorpusSource {
  std::string manifest;
  SynthConfig synth;

  Corpus load() const {
    if (!manifest.empty()) return load_corpus(manifest);
    return generate_corpus(synth);
  }
  double snippets_per_system() const { return synth.snippets_per_system(); }
};

class OutputTarget {
 public:
  OutputTarget(const std::string& path, std::ostream& fallback) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary | std::ios::trunc);
      if (!file_) throw Error(ErrorCode::MissingFile, "cannot create '" + path + "'");
    }
    out_ = path.empty() ? &fallback : &file_;
  }
  std::ostream& stream() { return *out_; }

 private:
  std::ofstream file_;
  std::ostream* out_ = nullptr;
};

int run_synth(const SynthConfig& cfg, const std::string& out_dir, std::ostream& out) {
  const Corpus corpus = generate_corpus(cfg);
  const auto manifest = save_corpus(corpus, out_dir);
  out << manifest.string() << "\n";
  return kExitOk;
}

int run_query(const std::string& method_flag, const std::string& direction_flag, const std::string& query_path,
              const std::string& manifest, const FingerprintParams& fp, unsigned threads, std::size_t top,
              std::ostream& out) {
  const Method method = parse_method(method_flag);
  const Direction direction = parse_direction(direction_flag);
  const Corpus corpus = load_corpus(manifest);
  const std::string query_id = std::filesystem::path(query_path).stem().string();
  const SnippetSequence q = load_sequence(query_path, query_id, query_modality(direction));
  if (q.dim() != corpus.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "query dim " + std::to_string(q.dim()) + " vs corpus dim " +
                                                  std::to_string(corpus.dim()));
  }

  RankedList rl;
  switch (method) {
    case Method::vote: rl = vote_rank(q, SnippetIndex::build(corpus, candidate_modality(direction))); break;
    case Method::dtw: rl = rank_by_alignment(q, corpus, AlignmentKind::full, direction, threads); break;
    case Method::sdtw: rl = rank_by_alignment(q, corpus, AlignmentKind::subsequence, direction, threads); break;
    case Method::fingerprint:
      rl = fingerprint_rank(q, FingerprintIndex::build(corpus, candidate_modality(direction), fp));
      break;
  }
  complete_ranking(rl, corpus.ids());

  // One line per piece: rank, id, score (blank for pieces the method never scored).
  const std::size_t n = top == 0 ? rl.total() : std::min(top, rl.total());
  for (std::size_t i = 0; i < n; ++i) {
    const bool scored = i < rl.items.size();
    const std::string& id = scored ? rl.items[i].piece_id : rl.unscored[i - rl.items.size()];
    out << (i + 1) << '\t' << id << '\t' << (scored ? format_real(rl.items[i].score) : std::string()) << '\n';
  }
  return kExitOk;
}

struct EvalFlags {
  std::string experiment = "identify";
  std::vector<std::string> methods;
  std::string direction = "both";
  std::vector<std::size_t> ks = kDefaultRecallKs;
  std::vector<std::size_t> lengths;
  std::vector<std::size_t> sizes = {25, 50, 100, 200, 321};
  std::size_t queries = 0;
  std::size_t repetitions = 10;
  std::size_t query_length = 0;
  std::uint64_t protocol_seed = 0;
  unsigned threads = 1;
  std::string out_path;
  FingerprintParams fingerprint;
};

void eval_identify(const Corpus& corpus, const EvalFlags& f, CsvWriter& csv) {
  std::vector<std::string> header = {"method", "direction", "n_queries", "n_corpus"};
  const auto tail = report_header(f.ks);
  header.insert(header.end(), tail.begin(), tail.end());
  csv.row(header);

  auto emit = [&](const EvalReport& r) {
    std::vector<std::string> row = {r.method, std::string(to_string(r.direction)), std::to_string(r.n_queries),
                                    std::to_string(r.n_corpus)};
    const auto rest = report_fields(r, f.ks);
    row.insert(row.end(), rest.begin(), rest.end());
    csv.row(row);
  };

  IdentifyOptions opts;
  opts.fingerprint = f.fingerprint;
  opts.ks = f.ks;
  opts.threads = f.threads;
  const auto dirs = directions_from(f.direction);
  if (f.methods.empty()) {
    // All three methods from one batched pass; per-query time is not attributable.
    for (const EvalReport& r : run_identification_suite(corpus, opts)) {
      if (std::find(dirs.begin(), dirs.end(), r.direction) != dirs.end()) emit(r);
    }
    return;
  }
  for (const std::string& m : f.methods) {
    for (Direction d : dirs) emit(run_piece_identification(corpus, parse_method(m), d, opts));
  }
}

void eval_fragment(const Corpus& corpus, const EvalFlags& f, double snippets_per_system, CsvWriter& csv) {
  std::vector<std::string> header = {"direction", "length", "n_queries", "n_corpus"};
  const auto tail = report_header(f.ks);
  header.insert(header.end(), tail.begin(), tail.end());
  csv.row(header);

  FragmentOptions opts;
  if (f.queries > 0) opts.n_queries = f.queries;
  opts.seed = f.protocol_seed;
  opts.ks = f.ks;
  opts.threads = f.threads;
  for (Direction d : directions_from(f.direction)) {
    // Default ladders: 10 s to 80 s of audio, or one to eight score systems.
    std::vector<std::size_t> lengths = f.lengths;
    if (lengths.empty()) {
      for (std::size_t step = 1; step <= 8; ++step) {
        lengths.push_back(d == Direction::a2s ? seconds_to_snippets(10.0 * static_cast<double>(step))
                                              : systems_to_snippets(step, snippets_per_system));
      }
    }
    for (const FragmentPoint& pt : run_fragment_experiment(corpus, lengths, d, opts)) {
      std::vector<std::string> row = {std::string(to_string(d)), std::to_string(pt.length),
                                      std::to_string(pt.report.n_queries), std::to_string(pt.report.n_corpus)};
      const auto rest = report_fields(pt.report, f.ks);
      row.insert(row.end(), rest.begin(), rest.end());
      csv.row(row);
    }
  }
}

void eval_scale(const Corpus& corpus, const EvalFlags& f, double snippets_per_system, bool with_mrr,
                CsvWriter& csv) {
  std::vector<std::string> header = {"direction", "size", "repetitions", "n_queries", "query_length"};
  if (with_mrr) header.push_back("mean_mrr");
  header.push_back("mean_query_seconds");
  csv.row(header);

  ScaleOptions opts;
  if (f.queries > 0) opts.n_queries = f.queries;
  opts.repetitions = f.repetitions;
  opts.seed = f.protocol_seed;
  for (Direction d : directions_from(f.direction)) {
    opts.query_length = f.query_length > 0 ? f.query_length : default_scale_query_length(d, snippets_per_system);
    for (const ScalePoint& pt : run_scalability_experiment(corpus, f.sizes, d, opts)) {
      std::vector<std::string> row = {std::string(to_string(d)), std::to_string(pt.size),
                                      std::to_string(opts.repetitions), std::to_string(opts.n_queries),
                                      std::to_string(opts.query_length)};
      if (with_mrr) row.push_back(format_real(pt.mean_mrr));
      row.push_back(format_real(pt.mean_query_seconds));
      csv.row(row);
    }
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cross-modal piece identification over embedding sequences"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  SynthConfig synth_cfg;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus on disk");
  add_synth_flags(*synth, synth_cfg);
  synth->add_option("--out", synth_out, "Output directory")->required();

  std::string method = "dtw", direction = "a2s", query_path, manifest;
  std::size_t top = 0;
  unsigned query_threads = 1;
  FingerprintParams query_fp;
  auto* query = app.add_subcommand("query", "Rank corpus pieces against one query file");
  query->add_option("--method", method, "vote, dtw, sdtw or fingerprint")
      ->check(CLI::IsMember({"vote", "dtw", "sdtw", "fingerprint"}))
      ->capture_default_str();
  query->add_option("--direction", direction, "a2s (audio query) or s2a (score query)")
      ->check(CLI::IsMember({"a2s", "s2a"}))
      ->capture_default_str();
  query->add_option("--query", query_path, "Query embedding file")->required();
  query->add_option("--corpus", manifest, "Corpus manifest")->required();
  query->add_option("--top", top, "Print only the first N pieces (0 = all)")->capture_default_str();
  query->add_option("--threads", query_threads, "Worker threads for alignment")->capture_default_str();
  add_fingerprint_flags(*query, query_fp);

  CorpusSource eval_src;
  EvalFlags eval_flags;
  auto* eval = app.add_subcommand("eval", "Run an evaluation protocol and write CSV");
  eval->add_option("--experiment", eval_flags.experiment, "identify, fragment or scale")
      ->check(CLI::IsMember({"identify", "fragment", "scale"}))
      ->capture_default_str();
  eval->add_option("--corpus", eval_src.manifest, "Corpus manifest (default: generate from the synth flags)");
  add_synth_flags(*eval, eval_src.synth);
  eval->add_option("--method", eval_flags.methods, "identify: methods to run, timed (default: all, batched)")
      ->check(CLI::IsMember({"vote", "dtw", "sdtw", "fingerprint"}));
  eval->add_option("--direction", eval_flags.direction, "a2s, s2a or both")
      ->check(CLI::IsMember({"a2s", "s2a", "both"}))
      ->capture_default_str();
  eval->add_option("--ks", eval_flags.ks, "Recall cut-offs")->delimiter(',')->capture_default_str();
  eval->add_option("--lengths", eval_flags.lengths, "fragment: lengths in snippets (default: 10 s to 80 s)")
      ->delimiter(',');
  eval->add_option("--sizes", eval_flags.sizes, "scale: sub-corpus sizes")->delimiter(',')->capture_default_str();
  eval->add_option("--queries", eval_flags.queries, "fragment/scale: queries per point (default: protocol value)");
  eval->add_option("--repetitions", eval_flags.repetitions, "scale: repetitions per size")->capture_default_str();
  eval->add_option("--query-length", eval_flags.query_length, "scale: fragment length (default: 50 s / 4 systems)");
  eval->add_option("--protocol-seed", eval_flags.protocol_seed, "Seed for query sampling")->capture_default_str();
  eval->add_option("--threads", eval_flags.threads, "Worker threads")->capture_default_str();
  eval->add_option("--out", eval_flags.out_path, "CSV path (default: standard output)");
  add_fingerprint_flags(*eval, eval_flags.fingerprint);

  CorpusSource bench_src;
  EvalFlags bench_flags;
  bench_flags.queries = 100;
  bench_flags.repetitions = 1;
  auto* bench = app.add_subcommand("bench", "Time subsequence search against growing sub-corpora");
  bench->add_option("--corpus", bench_src.manifest, "Corpus manifest (default: generate from the synth flags)");
  add_synth_flags(*bench, bench_src.synth);
  bench->add_option("--direction", bench_flags.direction, "a2s, s2a or both")
      ->check(CLI::IsMember({"a2s", "s2a", "both"}))
      ->capture_default_str();
  bench->add_option("--sizes", bench_flags.sizes, "Sub-corpus sizes")->delimiter(',')->capture_default_str();
  bench->add_option("--queries", bench_flags.queries, "Queries per repetition")->capture_default_str();
  bench->add_option("--repetitions", bench_flags.repetitions, "Repetitions per size")->capture_default_str();
  bench->add_option("--query-length", bench_flags.query_length, "Fragment length (default: 50 s / 4 systems)");
  bench->add_option("--protocol-seed", bench_flags.protocol_seed, "Seed for query sampling")->capture_default_str();
  bench->add_option("--out", bench_flags.out_path, "CSV path (default: standard output)");

  try {
    std::vector<std::string> reversed(args.begin() + (args.empty() ? 0 : 1), args.end());
    std::reverse(reversed.begin(), reversed.end());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    try {
      if (synth->parsed()) {
        synth_cfg.validate();
        return run_synth(synth_cfg, synth_out, out);
      }
      if (query->parsed()) {
        query_fp.validate();
        return run_query(method, direction, query_path, manifest, query_fp, query_threads, top, out);
      }
      EvalFlags& f = eval->parsed() ? eval_flags : bench_flags;
      CorpusSource& src = eval->parsed() ? eval_src : bench_src;
      src.synth.validate();
      f.fingerprint.validate();
      if (f.threads == 0) throw Error(ErrorCode::InvalidConfig, "--threads must be positive");
      const Corpus corpus = src.load();
      OutputTarget target(f.out_path, out);
      CsvWriter csv(target.stream());
      if (bench->parsed()) {
        eval_scale(corpus, f, src.snippets_per_system(), false, csv);
      } else if (f.experiment == "identify") {
        eval_identify(corpus, f, csv);
      } else if (f.experiment == "fragment") {
        eval_fragment(corpus, f, src.snippets_per_system(), csv);
      } else {
        eval_scale(corpus, f, src.snippets_per_system(), true, csv);
      }
      return kExitOk;
    } catch (const Error& e) {
      // Bad flag values surface as InvalidConfig; everything else is about the data.
      err << "error: " << e.what() << "\n";
      return e.code() == ErrorCode::InvalidConfig ? kExitUsage : kExitData;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace pieceid
