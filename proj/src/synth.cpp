#include "pieceid/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

#include "pieceid/error.hpp"

namespace pieceid {

void SynthConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (n_pieces == 0) bad("n_pieces must be positive");
  if (dim == 0) bad("dim must be positive");
  if (mean_score_len < 2 || mean_audio_len < 2) bad("mean lengths must be at least 2");
  if (!(pair_noise_sigma >= 0.0)) bad("pair_noise_sigma must be >= 0");
  if (!(tempo_warp_low > 0.0) || !(tempo_warp_low <= 1.0) || !(tempo_warp_high >= 1.0)) {
    bad("tempo warp range must be positive and contain 1.0");
  }
  if (!(repeat_fraction >= 0.0 && repeat_fraction <= 1.0)) bad("repeat_fraction must be in [0, 1]");
  if (!(degenerate_fraction >= 0.0 && degenerate_fraction <= 1.0)) bad("degenerate_fraction must be in [0, 1]");
  if (!(max_step_degrees >= 0.0 && max_step_degrees <= 90.0)) bad("max_step_degrees must be in [0, 90]");
  if (!(length_spread >= 0.0 && length_spread < 1.0)) bad("length_spread must be in [0, 1)");
  if (!(degenerate_noise_gain >= 0.0)) bad("degenerate_noise_gain must be >= 0");
  if (!(systems_per_piece > 0.0)) bad("systems_per_piece must be positive");
  if (!(noise_correlation >= 0.0 && noise_correlation < 1.0)) bad("noise_correlation must be in [0, 1)");
  if (!(piece_noise_spread >= 0.0)) bad("piece_noise_spread must be >= 0");
}

SynthConfig SynthConfig::noiseless(std::size_t n_pieces, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n_pieces = n_pieces;
  cfg.seed = seed;
  cfg.pair_noise_sigma = 0.0;
  cfg.tempo_warp_low = 1.0;
  cfg.tempo_warp_high = 1.0;
  cfg.mean_audio_len = cfg.mean_score_len;
  cfg.repeat_fraction = 0.0;
  return cfg;
}

std::string synth_piece_id(std::size_t i) {
  std::string digits = std::to_string(i);
  if (digits.size() < 5) digits.insert(0, 5 - digits.size(), '0');
  return "piece-" + digits;
}

namespace {

void normalize_row(std::span<double> v) {
  double s = 0.0;
  for (double x : v) s = std::fma(x, x, s);
  const double n = std::sqrt(s);
  for (double& x : v) x /= n;
}

std::vector<double> random_unit(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> v(dim);
  double s = 0.0;
  do {
    for (auto& x : v) x = gauss(rng);
    s = 0.0;
    for (double x : v) s += x * x;
  } while (s < 1e-12);
  normalize_row(v);
  return v;
}

std::vector<double> iid_track(std::size_t length, std::size_t dim, std::mt19937_64& rng) {
  std::vector<double> out;
  out.reserve(length * dim);
  for (std::size_t t = 0; t < length; ++t) {
    const auto v = random_unit(dim, rng);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

// Maps `latents` (length rows) onto `out_len` rows with matched endpoints,
// normalized linear interpolation between neighbouring latents.
std::vector<double> resample(const std::vector<double>& latents, std::size_t length, std::size_t dim,
                             std::size_t out_len) {
  std::vector<double> out(out_len * dim);
  for (std::size_t k = 0; k < out_len; ++k) {
    const double pos = out_len == 1 ? 0.0
                                    : static_cast<double>(k) * static_cast<double>(length - 1) /
                                          static_cast<double>(out_len - 1);
    const std::size_t lo = std::min(static_cast<std::size_t>(pos), length - 1);
    const double frac = pos - static_cast<double>(lo);
    double* dst = out.data() + k * dim;
    const double* a = latents.data() + lo * dim;
    if (frac == 0.0 || lo + 1 >= length) {
      std::copy(a, a + dim, dst);
      continue;
    }
    const double* b = a + dim;
    for (std::size_t c = 0; c < dim; ++c) dst[c] = (1.0 - frac) * a[c] + frac * b[c];
    normalize_row(std::span<double>(dst, dim));
  }
  return out;
}

// Adds N(0, sigma^2 / dim) per coordinate to every row and renormalizes. The
// perturbation is an AR(1) process along the rows with coefficient rho, so
// its marginal spread does not depend on rho. The Gaussian draws are consumed
// even when sigma is zero so that corpora that differ only in noise level
// share every other random choice.
std::vector<double> add_noise(const std::vector<double>& rows, std::size_t dim, double sigma, double rho,
                              std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double scale = sigma / std::sqrt(static_cast<double>(dim));
  const double fresh = std::sqrt(1.0 - rho * rho);
  std::vector<double> out(rows.size());
  std::vector<double> state(dim, 0.0);
  for (std::size_t off = 0; off < rows.size(); off += dim) {
    for (std::size_t c = 0; c < dim; ++c) {
      const double g = gauss(rng);
      state[c] = off == 0 ? g : rho * state[c] + fresh * g;
      out[off + c] = sigma == 0.0 ? rows[off + c] : rows[off + c] + scale * state[c];
    }
    if (sigma != 0.0) normalize_row(std::span<double>(out).subspan(off, dim));
  }
  return out;
}

std::set<std::size_t> pick_subset(std::size_t n, double fraction, std::mt19937_64& rng) {
  const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  return std::set<std::size_t>(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(k, n)));
}

}  // namespace

std::vector<double> latent_track(std::size_t length, std::size_t dim, double max_step_degrees, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> step(0.0, max_step_degrees * std::numbers::pi / 180.0);
  std::vector<double> out;
  out.reserve(length * dim);
  std::vector<double> cur = random_unit(dim, rng);
  out.insert(out.end(), cur.begin(), cur.end());
  std::vector<double> dir(dim);
  for (std::size_t t = 1; t < length; ++t) {
    // Random tangent direction at `cur`, then a geodesic step.
    double along = 0.0;
    double s = 0.0;
    do {
      for (auto& x : dir) x = gauss(rng);
      along = 0.0;
      for (std::size_t c = 0; c < dim; ++c) along += dir[c] * cur[c];
      s = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        dir[c] -= along * cur[c];
        s += dir[c] * dir[c];
      }
    } while (dim > 1 && s < 1e-12);
    const double angle = step(rng);
    if (dim > 1) {
      normalize_row(dir);
      for (std::size_t c = 0; c < dim; ++c) cur[c] = std::cos(angle) * cur[c] + std::sin(angle) * dir[c];
      normalize_row(cur);
    }
    out.insert(out.end(), cur.begin(), cur.end());
  }
  return out;
}

SynthCorpus generate_corpus_traced(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const auto repeats = pick_subset(cfg.n_pieces, cfg.repeat_fraction, rng);
  const auto degenerate = pick_subset(cfg.n_pieces, cfg.degenerate_fraction, rng);

  const double mean = static_cast<double>(cfg.mean_score_len);
  const auto len_lo = std::max<long long>(2, std::llround(mean * (1.0 - cfg.length_spread)));
  const auto len_hi = std::max<long long>(len_lo, std::llround(mean * (1.0 + cfg.length_spread)));
  std::uniform_int_distribution<long long> length_dist(len_lo, len_hi);
  std::uniform_real_distribution<double> warp_dist(cfg.tempo_warp_low, cfg.tempo_warp_high);
  std::uniform_real_distribution<double> repeat_len_dist(0.2, 0.4);
  std::normal_distribution<double> difficulty_dist(0.0, 1.0);

  SynthCorpus out;
  std::vector<Piece> pieces;
  pieces.reserve(cfg.n_pieces);
  const std::size_t dim = cfg.dim;

  for (std::size_t i = 0; i < cfg.n_pieces; ++i) {
    PieceTrace trace;
    trace.latent_length = static_cast<std::size_t>(length_dist(rng));
    const bool is_degenerate = degenerate.contains(i);
    const std::vector<double> latents = is_degenerate
                                            ? iid_track(trace.latent_length, dim, rng)
                                            : latent_track(trace.latent_length, dim, cfg.max_step_degrees, rng);

    trace.tempo_factor = cfg.nominal_audio_ratio() * warp_dist(rng);
    trace.noise_multiplier = std::exp(cfg.piece_noise_spread * difficulty_dist(rng));
    const auto audio_len = static_cast<std::size_t>(
        std::max<long long>(1, std::llround(trace.tempo_factor * static_cast<double>(trace.latent_length))));
    std::vector<double> audio_latents = resample(latents, trace.latent_length, dim, audio_len);

    if (repeats.contains(i)) {
      const auto section =
          std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(repeat_len_dist(rng) * audio_len)));
      std::uniform_int_distribution<std::size_t> start_dist(0, audio_len - section);
      const std::size_t start = start_dist(rng);
      const auto first = audio_latents.begin() + static_cast<std::ptrdiff_t>(start * dim);
      const auto last = first + static_cast<std::ptrdiff_t>(section * dim);
      const std::vector<double> copy(first, last);
      audio_latents.insert(audio_latents.begin() + static_cast<std::ptrdiff_t>((start + section) * dim), copy.begin(),
                           copy.end());
      trace.repeat_span = std::make_pair(start + section, start + 2 * section);
    }

    const double sigma =
        cfg.effective_sigma() * (is_degenerate ? cfg.degenerate_noise_gain : trace.noise_multiplier);
    const double rho = is_degenerate ? 0.0 : cfg.noise_correlation;
    const auto score_rows = add_noise(latents, dim, sigma, rho, rng);
    const auto audio_rows = add_noise(audio_latents, dim, sigma, rho, rng);

    Piece p;
    p.id = synth_piece_id(i);
    p.score.emplace(p.id, Modality::score, dim, score_rows);
    p.audio.emplace(p.id, Modality::audio, dim, audio_rows);
    p.tags.has_repeats = trace.repeat_span.has_value();
    p.tags.degenerate = is_degenerate;
    pieces.push_back(std::move(p));
    out.traces.push_back(trace);
  }
  out.corpus = Corpus(std::move(pieces));
  return out;
}

Corpus generate_corpus(const SynthConfig& cfg) { return generate_corpus_traced(cfg).corpus; }

Fragment sample_fragment(const SnippetSequence& seq, std::size_t length, std::mt19937_64& rng) {
  if (length == 0) throw Error(ErrorCode::NonPositive, "fragment length must be positive");
  if (length > seq.size()) {
    throw Error(ErrorCode::FragmentTooLong, "fragment of " + std::to_string(length) + " snippets from '" +
                                                seq.piece_id() + "' of length " + std::to_string(seq.size()));
  }
  std::uniform_int_distribution<std::size_t> start_dist(0, seq.size() - length);
  const std::size_t start = start_dist(rng);
  return Fragment{seq.slice(start, length), seq.piece_id(), start};
}

std::size_t seconds_to_snippets(double seconds) {
  if (!(seconds > 0.0)) throw Error(ErrorCode::NonPositive, "seconds must be positive");
  const double n = std::floor((seconds - 2.0) / 0.5) + 1.0;
  if (n < 1.0) throw Error(ErrorCode::NonPositive, "audio shorter than one 2 s window");
  return static_cast<std::size_t>(n);
}

std::size_t systems_to_snippets(std::size_t systems, double snippets_per_system) {
  if (systems == 0) throw Error(ErrorCode::NonPositive, "systems must be positive");
  if (!(snippets_per_system > 0.0)) throw Error(ErrorCode::NonPositive, "snippets per system must be positive");
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(systems) * snippets_per_system)));
}

}  // namespace pieceid
