#include "pieceid/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <system_error>

#include <json.hpp>

#include "binio.hpp"
#include "pieceid/error.hpp"

namespace pieceid {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr char kMagic[5] = {'A', 'S', 'E', 'Q', '1'};

std::string quoted(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

EmbeddingData read_embedding_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + quoted(path));

  char magic[5] = {};
  if (!in.read(magic, 5) || !std::equal(magic, magic + 5, kMagic)) {
    throw Error(ErrorCode::BadMagic, quoted(path) + " is not an ASEQ1 embedding file");
  }
  const std::string what = "header of " + quoted(path);
  EmbeddingData data;
  data.dim = binio::get<std::uint32_t>(in, what);
  data.count = binio::get<std::uint32_t>(in, what);
  if (data.dim == 0) throw Error(ErrorCode::BadLength, quoted(path) + " declares dim 0");

  const std::size_t n = data.dim * data.count;
  std::vector<float> raw(n);
  if (n > 0 && !in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n * sizeof(float)))) {
    throw Error(ErrorCode::BadLength, "payload of " + quoted(path) + " is shorter than " + std::to_string(data.count) +
                                          " x " + std::to_string(data.dim) + " floats");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorCode::BadLength, quoted(path) + " has bytes after the declared payload");
  }
  data.values.assign(raw.begin(), raw.end());
  for (double v : data.values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::BadLength, quoted(path) + " holds a non-finite value");
  }
  return data;
}

void write_embedding_file(const fs::path& path, std::size_t dim, std::span<const double> values) {
  if (dim == 0 || values.size() % dim != 0) {
    throw Error(ErrorCode::DimensionMismatch, "cannot write " + std::to_string(values.size()) + " values as rows of " +
                                                  std::to_string(dim));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::MissingFile, "cannot create " + quoted(path));
  out.write(kMagic, 5);
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(values.size() / dim));
  for (double v : values) binio::put<float>(out, static_cast<float>(v));
  if (!out) throw Error(ErrorCode::MissingFile, "write to " + quoted(path) + " failed");
}

SnippetSequence load_sequence(const fs::path& path, std::string piece_id, Modality modality) {
  const EmbeddingData data = read_embedding_file(path);
  if (data.count == 0) throw Error(ErrorCode::EmptySequence, quoted(path) + " holds no snippets");
  try {
    return SnippetSequence(std::move(piece_id), modality, data.dim, data.values);
  } catch (const Error& e) {
    throw Error(e.code(), quoted(path) + ": " + e.what());
  }
}

Corpus load_corpus(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open manifest " + quoted(manifest));
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadManifest, quoted(manifest) + ": " + e.what());
  }
  auto bad = [&](const std::string& what) { throw Error(ErrorCode::BadManifest, quoted(manifest) + ": " + what); };
  if (!doc.is_object() || !doc.contains("pieces") || !doc["pieces"].is_array()) bad("expected an object with a 'pieces' array");
  if (!doc.contains("dim") || !doc["dim"].is_number_unsigned() || doc["dim"].get<std::size_t>() == 0) {
    bad("expected a positive integer 'dim'");
  }
  const auto dim = doc["dim"].get<std::size_t>();
  const fs::path base = manifest.parent_path();

  std::vector<Piece> pieces;
  std::set<std::string> seen;
  for (const auto& entry : doc["pieces"]) {
    if (!entry.is_object() || !entry.contains("id") || !entry["id"].is_string()) bad("every piece needs a string 'id'");
    Piece p;
    p.id = entry["id"].get<std::string>();
    if (!seen.insert(p.id).second) {
      throw Error(ErrorCode::DuplicateId, quoted(manifest) + ": piece '" + p.id + "' is listed twice");
    }
    for (const auto& [key, modality] : {std::pair{"score_file", Modality::score}, {"audio_file", Modality::audio}}) {
      if (!entry.contains(key)) continue;
      if (!entry[key].is_string()) bad("piece '" + p.id + "': '" + key + "' must be a path string");
      const fs::path file = base / entry[key].get<std::string>();
      if (!fs::exists(file)) {
        throw Error(ErrorCode::MissingFile, "piece '" + p.id + "': " + quoted(file) + " does not exist");
      }
      SnippetSequence seq = [&] {
        try {
          return load_sequence(file, p.id, modality);
        } catch (const Error& e) {
          throw Error(e.code(), "piece '" + p.id + "': " + e.what());
        }
      }();
      if (seq.dim() != dim) {
        throw Error(ErrorCode::DimensionMismatch, "piece '" + p.id + "': " + quoted(file) + " has dim " +
                                                      std::to_string(seq.dim()) + ", manifest says " +
                                                      std::to_string(dim));
      }
      (modality == Modality::score ? p.score : p.audio) = std::move(seq);
    }
    if (entry.contains("tags")) {
      const auto& tags = entry["tags"];
      if (!tags.is_object()) bad("piece '" + p.id + "': 'tags' must be an object");
      p.tags.has_repeats = tags.value("has_repeats", false);
      p.tags.degenerate = tags.value("degenerate", false);
    }
    pieces.push_back(std::move(p));
  }
  return Corpus(std::move(pieces));
}

fs::path save_corpus(const Corpus& corpus, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "pieces", ec);
  if (ec) throw Error(ErrorCode::MissingFile, "cannot create " + quoted(dir / "pieces") + ": " + ec.message());

  json doc;
  doc["dim"] = corpus.dim();
  doc["pieces"] = json::array();
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Piece& p = corpus[i];
    json entry;
    entry["id"] = p.id;
    // Index-based names keep arbitrary ids out of the file system.
    std::string stem = std::to_string(i);
    if (stem.size() < 5) stem.insert(0, 5 - stem.size(), '0');
    for (const auto& [key, modality, suffix] :
         {std::tuple{"score_file", Modality::score, "score"}, {"audio_file", Modality::audio, "audio"}}) {
      if (!p.has_view(modality)) continue;
      const std::string rel = "pieces/" + stem + "." + suffix + ".aseq";
      const SnippetSequence& seq = p.view(modality);
      write_embedding_file(dir / rel, seq.dim(), seq.data());
      entry[key] = rel;
    }
    entry["tags"] = {{"has_repeats", p.tags.has_repeats}, {"degenerate", p.tags.degenerate}};
    doc["pieces"].push_back(std::move(entry));
  }
  const fs::path manifest = dir / "manifest.json";
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) throw Error(ErrorCode::MissingFile, "cannot create " + quoted(manifest));
  out << doc.dump(2) << "\n";
  return manifest;
}

std::string csv_quote(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out_ << ',';
    out_ << csv_quote(fields[i]);
  }
  out_ << "\r\n";
}

std::string format_real(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

}  // namespace pieceid
