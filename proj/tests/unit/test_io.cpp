#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "helpers.hpp"
#include "pieceid/error.hpp"
#include "pieceid/io.hpp"
#include "pieceid/synth.hpp"

using namespace pieceid;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(auto&& fn, std::string* message = nullptr) {
  try {
    fn();
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::EmptyRanks;
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("pieceid_io_" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
  }
  void spit(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << bytes;
  }

  fs::path dir_;
};

Corpus small_corpus(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n_pieces = 5;
  cfg.mean_score_len = 20;
  cfg.mean_audio_len = 25;
  cfg.seed = seed;
  return generate_corpus(cfg);
}

// Loaded data passes through float32, so compare within its precision.
void expect_close(const Corpus& a, const Corpus& b) {
  ASSERT_EQ(a.ids(), b.ids());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].tags, b[i].tags);
    for (Modality m : {Modality::score, Modality::audio}) {
      const auto x = a[i].view(m).data();
      const auto y = b[i].view(m).data();
      ASSERT_EQ(x.size(), y.size());
      for (std::size_t k = 0; k < x.size(); ++k) ASSERT_NEAR(x[k], y[k], 1e-6);
    }
  }
}

}  // namespace

using EmbeddingFile = TempDir;
using Manifest = TempDir;

TEST_F(EmbeddingFile, LayoutIsLittleEndianFloat32) {
  const std::vector<double> v = {1.0, -2.0, 0.5, 4.0, 0.0, 1.0};
  write_embedding_file(dir_ / "a.aseq", 2, v);
  const std::string bytes = slurp(dir_ / "a.aseq");
  ASSERT_EQ(bytes.size(), 5u + 8u + 4u * 6u);
  EXPECT_EQ(bytes.substr(0, 5), "ASEQ1");
  EXPECT_EQ(std::string(bytes.data() + 5, 8), std::string("\x02\0\0\0\x03\0\0\0", 8));
  float second;
  std::memcpy(&second, bytes.data() + 13 + 4, 4);
  EXPECT_EQ(second, -2.0f);

  const EmbeddingData d = read_embedding_file(dir_ / "a.aseq");
  EXPECT_EQ(d.dim, 2u);
  EXPECT_EQ(d.count, 3u);
  EXPECT_EQ(d.values, v);
}

TEST_F(EmbeddingFile, LoadNormalizesRows) {
  write_embedding_file(dir_ / "a.aseq", 2, std::vector<double>{3.0, 4.0});
  const SnippetSequence s = load_sequence(dir_ / "a.aseq", "x", Modality::audio);
  EXPECT_NEAR(s.row(0)[0], 0.6, 1e-15);
  EXPECT_NEAR(s.row(0)[1], 0.8, 1e-15);
}

TEST_F(EmbeddingFile, Errors) {
  std::string msg;
  EXPECT_EQ(code_of([&] { read_embedding_file(dir_ / "missing.aseq"); }), ErrorCode::MissingFile);

  spit(dir_ / "magic.aseq", "NOPE!\x01\0\0\0\x01\0\0\0abcd");
  EXPECT_EQ(code_of([&] { read_embedding_file(dir_ / "magic.aseq"); }), ErrorCode::BadMagic);

  write_embedding_file(dir_ / "good.aseq", 4, std::vector<double>(12, 0.5));
  const std::string good = slurp(dir_ / "good.aseq");
  spit(dir_ / "short.aseq", good.substr(0, good.size() - 3));
  EXPECT_EQ(code_of([&] { read_embedding_file(dir_ / "short.aseq"); }, &msg), ErrorCode::BadLength);
  EXPECT_NE(msg.find("short.aseq"), std::string::npos);

  spit(dir_ / "header.aseq", good.substr(0, 8));
  EXPECT_EQ(code_of([&] { read_embedding_file(dir_ / "header.aseq"); }), ErrorCode::BadLength);

  spit(dir_ / "long.aseq", good + "x");
  EXPECT_EQ(code_of([&] { read_embedding_file(dir_ / "long.aseq"); }), ErrorCode::BadLength);

  write_embedding_file(dir_ / "empty.aseq", 4, std::vector<double>{});
  EXPECT_EQ(code_of([&] { load_sequence(dir_ / "empty.aseq", "e", Modality::score); }), ErrorCode::EmptySequence);

  write_embedding_file(dir_ / "zero.aseq", 2, std::vector<double>{1.0, 0.0, 0.0, 0.0});
  EXPECT_EQ(code_of([&] { load_sequence(dir_ / "zero.aseq", "z", Modality::score); }, &msg), ErrorCode::ZeroVector);
  EXPECT_NE(msg.find("zero.aseq"), std::string::npos);

  EXPECT_EQ(code_of([&] { write_embedding_file(dir_ / "bad.aseq", 3, std::vector<double>(4, 1.0)); }),
            ErrorCode::DimensionMismatch);
}

TEST_F(Manifest, RoundTripKeepsOrderAndValues) {
  const Corpus c = small_corpus(1);
  // Reverse order so the manifest order differs from id order.
  std::vector<std::size_t> order = {4, 2, 0, 3, 1};
  const Corpus shuffled = c.subset(order);
  const fs::path manifest = save_corpus(shuffled, dir_ / "corpus");
  EXPECT_EQ(manifest, dir_ / "corpus" / "manifest.json");
  const Corpus loaded = load_corpus(manifest);
  expect_close(shuffled, loaded);
  EXPECT_EQ(loaded.dim(), c.dim());

  // A saved corpus that went through float32 once reloads bit-identically.
  save_corpus(loaded, dir_ / "again");
  EXPECT_EQ(load_corpus(dir_ / "again" / "manifest.json"), loaded);
}

TEST_F(Manifest, SaveIsByteDeterministic) {
  const Corpus c = small_corpus(2);
  save_corpus(c, dir_ / "a");
  save_corpus(c, dir_ / "b");
  for (const auto& entry : fs::recursive_directory_iterator(dir_ / "a")) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), dir_ / "a");
    EXPECT_EQ(slurp(entry.path()), slurp(dir_ / "b" / rel)) << rel;
  }
}

TEST_F(Manifest, Errors) {
  const Corpus c = small_corpus(3);
  const fs::path manifest = save_corpus(c, dir_ / "c");
  nlohmann::json doc = nlohmann::json::parse(slurp(manifest));
  std::string msg;

  auto with = [&](const nlohmann::json& j) {
    spit(dir_ / "c" / "edited.json", j.dump());
    return dir_ / "c" / "edited.json";
  };

  nlohmann::json dup = doc;
  dup["pieces"][1]["id"] = dup["pieces"][0]["id"];
  EXPECT_EQ(code_of([&] { load_corpus(with(dup)); }, &msg), ErrorCode::DuplicateId);
  EXPECT_NE(msg.find(doc["pieces"][0]["id"].get<std::string>()), std::string::npos);

  nlohmann::json missing = doc;
  missing["pieces"][2]["audio_file"] = "pieces/nothing.aseq";
  EXPECT_EQ(code_of([&] { load_corpus(with(missing)); }, &msg), ErrorCode::MissingFile);
  EXPECT_NE(msg.find(doc["pieces"][2]["id"].get<std::string>()), std::string::npos);

  nlohmann::json dim = doc;
  dim["dim"] = 16;
  EXPECT_EQ(code_of([&] { load_corpus(with(dim)); }, &msg), ErrorCode::DimensionMismatch);
  EXPECT_NE(msg.find(doc["pieces"][0]["id"].get<std::string>()), std::string::npos);

  const std::string victim = doc["pieces"][3]["score_file"].get<std::string>();
  const std::string bytes = slurp(dir_ / "c" / victim);
  spit(dir_ / "c" / victim, bytes.substr(0, bytes.size() - 1));
  EXPECT_EQ(code_of([&] { load_corpus(manifest); }, &msg), ErrorCode::BadLength);
  EXPECT_NE(msg.find(victim.substr(victim.find('/') + 1)), std::string::npos);
  EXPECT_NE(msg.find(doc["pieces"][3]["id"].get<std::string>()), std::string::npos);
  spit(dir_ / "c" / victim, "XXXXX" + bytes.substr(5));
  EXPECT_EQ(code_of([&] { load_corpus(manifest); }), ErrorCode::BadMagic);

  spit(dir_ / "c" / "broken.json", "{\"dim\": 32, \"pieces\": [");
  EXPECT_EQ(code_of([&] { load_corpus(dir_ / "c" / "broken.json"); }), ErrorCode::BadManifest);
  EXPECT_EQ(code_of([&] { load_corpus(with({{"pieces", nlohmann::json::array()}})); }), ErrorCode::BadManifest);
  EXPECT_EQ(code_of([&] { load_corpus(dir_ / "nope.json"); }), ErrorCode::MissingFile);
}

TEST(Csv, QuotesOnlyWhenNeeded) {
  EXPECT_EQ(csv_quote("plain"), "plain");
  EXPECT_EQ(csv_quote("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_quote("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(csv_quote("two\nlines"), "\"two\nlines\"");
  std::ostringstream out;
  CsvWriter w(out);
  w.row({"id", "x,y"});
  w.row({"", "1"});
  EXPECT_EQ(out.str(), "id,\"x,y\"\r\n,1\r\n");
}

TEST(Csv, RealsRoundTrip) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng);
    EXPECT_EQ(std::stod(format_real(x)), x);
  }
  EXPECT_EQ(format_real(0.5), "0.5");
  EXPECT_EQ(format_real(1.0), "1");
}
