#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <map>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "pieceid/cli.hpp"
#include "pieceid/eval.hpp"
#include "pieceid/io.hpp"
#include "pieceid/synth.hpp"

using namespace pieceid;
namespace fs = std::filesystem;

namespace {

struct Invocation {
  int code = -1;
  std::string out;
  std::string err;
};

Invocation cli(std::vector<std::string> args) {
  args.insert(args.begin(), "pieceid");
  std::ostringstream out, err;
  Invocation r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

// Runs the built executable through the shell; stdout only.
Invocation process(const std::string& args) {
  Invocation r;
  const std::string cmd = std::string(PIECEID_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return files;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    rows.push_back(fields);
  }
  return rows;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("pieceid_cli_" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& rel) const { return (dir_ / rel).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, SynthTwiceGivesIdenticalTrees) {
  const Invocation a = process("synth --pieces 10 --seed 7 --out " + path("a"));
  const Invocation b = process("synth --pieces 10 --seed 7 --out " + path("b"));
  ASSERT_EQ(a.code, 0);
  ASSERT_EQ(b.code, 0);
  EXPECT_EQ(a.out, path("a") + "/manifest.json\n");
  const auto ta = tree(path("a")), tb = tree(path("b"));
  EXPECT_EQ(ta.size(), 21u);
  EXPECT_EQ(ta, tb);
  const Corpus c = load_corpus(path("a") + "/manifest.json");
  EXPECT_EQ(c.size(), 10u);
}

TEST_F(Cli, NoiselessSelfQueryRanksTruthFirst) {
  ASSERT_EQ(cli({"synth", "--pieces", "8", "--seed", "3", "--sigma", "0", "--score-len", "50", "--audio-len", "50",
                 "--warp-low", "1", "--warp-high", "1", "--repeat-fraction", "0", "--out", path("c")})
                .code,
            0);
  const Corpus c = load_corpus(path("c") + "/manifest.json");
  const std::string truth = c[5].id;
  write_embedding_file(path("query.aseq"), c.dim(), c[5].audio->data());
  for (const char* method : {"dtw", "sdtw", "vote", "fingerprint"}) {
    const Invocation r = process(std::string("query --method ") + method + " --query " + path("query.aseq") +
                          " --corpus " + path("c") + "/manifest.json");
    ASSERT_EQ(r.code, 0) << method;
    const std::string first = r.out.substr(0, r.out.find('\n'));
    EXPECT_EQ(first.substr(0, first.rfind('\t')), "1\t" + truth) << method;
    EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 8) << method;
  }
  const Invocation top = cli({"query", "--query", path("query.aseq"), "--corpus", path("c") + "/manifest.json", "--top", "2",
                       "--direction", "s2a"});
  EXPECT_EQ(top.code, 0);
  EXPECT_EQ(std::count(top.out.begin(), top.out.end(), '\n'), 2);
}

TEST_F(Cli, EvalIdentifyMatchesLibrary) {
  SynthConfig cfg;
  cfg.n_pieces = 12;
  cfg.mean_score_len = 60;
  cfg.mean_audio_len = 75;
  cfg.seed = 4;
  const auto reports = run_identification_suite(generate_corpus(cfg));

  const Invocation r = process("eval --experiment identify --pieces 12 --score-len 60 --audio-len 75 --seed 4");
  ASSERT_EQ(r.code, 0);
  const auto rows = parse_csv(r.out);
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"method", "direction", "n_queries", "n_corpus", "r@1", "r@5", "r@10",
                                               "mrr", "median_rank", "mean_query_seconds"}));
  for (std::size_t i = 0; i < reports.size(); ++i) {
    EXPECT_EQ(rows[i + 1][0], reports[i].method);
    EXPECT_EQ(rows[i + 1][1], to_string(reports[i].direction));
    EXPECT_EQ(std::stod(rows[i + 1][7]), reports[i].mrr);
    EXPECT_EQ(rows[i + 1][9], "");
  }
  // Same corpus from disk, one timed method.
  ASSERT_EQ(cli({"synth", "--pieces", "12", "--score-len", "60", "--audio-len", "75", "--seed", "4", "--out",
                 path("d")})
                .code,
            0);
  const Corpus loaded = load_corpus(path("d") + "/manifest.json");
  const double lib = run_piece_identification(loaded, Method::dtw, Direction::s2a).mrr;
  const Invocation timed = cli({"eval", "--corpus", path("d") + "/manifest.json", "--method", "dtw", "--direction", "s2a"});
  ASSERT_EQ(timed.code, 0);
  const auto trows = parse_csv(timed.out);
  ASSERT_EQ(trows.size(), 2u);
  EXPECT_EQ(std::stod(trows[1][7]), lib);
  EXPECT_FALSE(trows[1][9].empty());
}

TEST_F(Cli, FragmentAndScaleCsv) {
  const Invocation f = cli({"eval", "--experiment", "fragment", "--pieces", "6", "--score-len", "60", "--audio-len", "75",
                     "--lengths", "3,9", "--queries", "20", "--direction", "a2s"});
  ASSERT_EQ(f.code, 0) << f.err;
  const auto rows = parse_csv(f.out);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0][0], "direction");
  EXPECT_EQ(rows[1][1], "3");
  EXPECT_EQ(rows[2][1], "9");

  const Invocation s = cli({"eval", "--experiment", "scale", "--pieces", "6", "--score-len", "60", "--audio-len", "75",
                     "--sizes", "1,3", "--queries", "5", "--repetitions", "2", "--query-length", "8",
                     "--direction", "s2a", "--out", path("scale.csv")});
  ASSERT_EQ(s.code, 0) << s.err;
  const auto srows = parse_csv(slurp(path("scale.csv")));
  ASSERT_EQ(srows.size(), 3u);
  EXPECT_EQ(srows[0], (std::vector<std::string>{"direction", "size", "repetitions", "n_queries", "query_length",
                                                "mean_mrr", "mean_query_seconds"}));
  EXPECT_EQ(srows[1][5], "1");

  const Invocation b = cli({"bench", "--pieces", "6", "--score-len", "60", "--audio-len", "75", "--sizes", "2",
                     "--queries", "3", "--query-length", "8", "--direction", "a2s"});
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(parse_csv(b.out)[0].size(), 6u);
}

TEST_F(Cli, OutputIsDeterministicApartFromTiming) {
  const std::string args = "eval --experiment fragment --pieces 6 --score-len 60 --audio-len 75 --lengths 4,12 "
                           "--queries 25 --protocol-seed 3";
  const Invocation a = process(args), b = process(args);
  ASSERT_EQ(a.code, 0);
  auto strip_timing = [](const std::string& csv) {
    std::string out;
    for (auto row : parse_csv(csv)) {
      row.pop_back();
      for (const auto& f : row) out += f + ",";
      out += "\n";
    }
    return out;
  };
  EXPECT_EQ(strip_timing(a.out), strip_timing(b.out));
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(cli({}).code, kExitUsage);
  EXPECT_EQ(cli({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(cli({"query", "--method", "shazam", "--query", "x", "--corpus", "y"}).code, kExitUsage);
  EXPECT_EQ(cli({"synth", "--pieces", "3"}).code, kExitUsage);  // --out missing
  EXPECT_EQ(cli({"synth", "--repeat-fraction", "2", "--out", path("bad")}).code, kExitUsage);
  EXPECT_EQ(cli({"--help"}).code, kExitOk);

  const Invocation missing = cli({"query", "--query", path("none.aseq"), "--corpus", path("none.json")});
  EXPECT_EQ(missing.code, kExitData);
  EXPECT_NE(missing.err.find("none.json"), std::string::npos);
  EXPECT_EQ(process("query --query " + path("none.aseq") + " --corpus " + path("none.json")).code, 1);
  EXPECT_EQ(process("nonsense").code, 2);
}
