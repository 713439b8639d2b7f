#pragma once

#include <cstddef>
#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pieceid/embedding.hpp"

namespace pieceid {

/// Raw contents of an embedding file: count x dim values, not normalized.
struct EmbeddingData {
  std::size_t dim = 0;
  std::size_t count = 0;
  std::vector<double> values;
};

/// Layout: "ASEQ1", u32 dim, u32 count, count * dim little-endian float32
/// values, row-major. Nothing may follow the payload.
EmbeddingData read_embedding_file(const std::filesystem::path& path);
void write_embedding_file(const std::filesystem::path& path, std::size_t dim, std::span<const double> values);

/// Reads and normalizes one view; errors name the file.
SnippetSequence load_sequence(const std::filesystem::path& path, std::string piece_id, Modality modality);

/// Manifest: {"dim": D, "pieces": [{"id", "score_file", "audio_file",
/// "tags": {"has_repeats", "degenerate"}}]}. File paths are relative to the
/// manifest's directory. Piece order is the manifest's order.
Corpus load_corpus(const std::filesystem::path& manifest);

/// Writes `dir`/manifest.json plus one file per view under `dir`/pieces.
/// Returns the manifest path.
std::filesystem::path save_corpus(const Corpus& corpus, const std::filesystem::path& dir);

/// RFC 4180 records: CRLF line ends, fields quoted when they contain a comma,
/// quote, CR or LF, with embedded quotes doubled.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}
  void row(const std::vector<std::string>& fields);

 private:
  std::ostream& out_;
};

std::string csv_quote(std::string_view field);

/// Shortest decimal text that reads back to the same double.
std::string format_real(double x);

}  // namespace pieceid
