#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pieceid/embedding.hpp"

namespace pieceid {

/// Knobs for synthetic corpora. Each piece follows a smooth latent track on
/// the unit sphere; the score view observes it one latent per snippet, the
/// audio view observes it resampled by a per-piece tempo factor. Both views
/// add independent noise, scaled per piece.
struct SynthConfig {
  std::size_t n_pieces = 321;
  std::size_t dim = 32;
  std::size_t mean_score_len = 422;
  std::size_t mean_audio_len = 523;
  /// Scale of the isotropic Gaussian perturbation added to each unit latent
  /// before renormalizing (per-coordinate std is sigma / sqrt(dim)).
  double pair_noise_sigma = 2.25;
  /// Lag-one correlation of the noise along a view's snippets.
  double noise_correlation = 0.0;
  /// Per-piece noise multiplier exp(spread * N(0, 1)): some pieces embed
  /// well, others poorly.
  double piece_noise_spread = 0.5;
  /// Per-piece stretch drawn uniformly from this range, applied on top of the
  /// nominal mean_audio_len / mean_score_len ratio.
  double tempo_warp_low = 0.7;
  double tempo_warp_high = 1.4;
  double repeat_fraction = 0.26;
  double degenerate_fraction = 0.02;
  /// Halves the effective pair noise.
  bool attention_mode = false;
  std::uint64_t seed = 0;

  double max_step_degrees = 15.0;
  /// Latent lengths are uniform in mean_score_len * [1 - spread, 1 + spread].
  double length_spread = 0.5;
  /// Noise multiplier applied to both views of degenerate pieces.
  double degenerate_noise_gain = 4.0;
  double systems_per_piece = 30.0;

  void validate() const;
  double effective_sigma() const { return attention_mode ? pair_noise_sigma / 2.0 : pair_noise_sigma; }
  double nominal_audio_ratio() const {
    return static_cast<double>(mean_audio_len) / static_cast<double>(mean_score_len);
  }
  double snippets_per_system() const { return static_cast<double>(mean_score_len) / systems_per_piece; }

  /// Noise-free, unwarped, repeat-free corpus where both views of a piece
  /// carry identical snippets.
  static SynthConfig noiseless(std::size_t n_pieces, std::uint64_t seed);
};

/// What the generator did to one piece, for inspection and tests.
struct PieceTrace {
  std::size_t latent_length = 0;
  double tempo_factor = 1.0;  // audio length ~= round(tempo_factor * latent_length)
  double noise_multiplier = 1.0;
  std::optional<std::pair<std::size_t, std::size_t>> repeat_span;  // [start, end) of the replayed audio section
};

struct SynthCorpus {
  Corpus corpus;
  std::vector<PieceTrace> traces;
};

SynthCorpus generate_corpus_traced(const SynthConfig& cfg);
Corpus generate_corpus(const SynthConfig& cfg);

/// Piece ids are zero-padded so lexicographic order equals generation order.
std::string synth_piece_id(std::size_t i);

/// Smooth spherical random walk with per-step angle uniform in [0, max_step].
std::vector<double> latent_track(std::size_t length, std::size_t dim, double max_step_degrees, std::mt19937_64& rng);

struct Fragment {
  SnippetSequence sequence;
  std::string piece_id;
  std::size_t start = 0;
};

/// Contiguous slice of `length` snippets at a uniformly random start.
Fragment sample_fragment(const SnippetSequence& seq, std::size_t length, std::mt19937_64& rng);

/// Audio snippets covered by `seconds` of audio with 2 s windows and a 0.5 s hop.
std::size_t seconds_to_snippets(double seconds);

/// Score snippets covered by `systems` rows, rounded to the nearest snippet.
std::size_t systems_to_snippets(std::size_t systems, double snippets_per_system);

}  // namespace pieceid
