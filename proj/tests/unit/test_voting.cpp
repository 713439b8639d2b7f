#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>

#include "helpers.hpp"
#include "pieceid/error.hpp"
#include "pieceid/voting.hpp"

using namespace pieceid;
using pieceid::testing::gaussian_rows;
using pieceid::testing::random_sequence;

namespace {

Corpus score_corpus(const std::vector<std::pair<std::string, std::size_t>>& shape, std::size_t dim,
                    std::mt19937_64& rng) {
  std::vector<Piece> pieces;
  for (const auto& [id, len] : shape) {
    Piece p;
    p.id = id;
    p.score = random_sequence(id, Modality::score, len, dim, rng);
    pieces.push_back(p);
  }
  return Corpus(pieces);
}

// Scan every piece and position without the index's flattening.
SnippetHit scan(const EmbeddingVector& x, const Corpus& c) {
  SnippetHit best{"", 0, 3.0};
  for (const Piece& p : c.pieces()) {
    const SnippetSequence& s = *p.score;
    for (std::size_t t = 0; t < s.size(); ++t) {
      const double d = cosine_distance(x, s[t]);
      if (d < best.distance || (d == best.distance && std::pair(p.id, t) < std::pair(best.piece_id, best.position))) {
        best = {p.id, t, d};
      }
    }
  }
  return best;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::BadManifest;
}

}  // namespace

TEST(SnippetIndex, CountsEntries) {
  std::mt19937_64 rng(1);
  const Corpus c = score_corpus({{"a", 3}, {"b", 5}}, 8, rng);
  const SnippetIndex idx = SnippetIndex::build(c, Modality::score);
  EXPECT_EQ(idx.size(), 8u);
  EXPECT_EQ(idx.pieces(), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(idx.piece_id(3), "b");
  EXPECT_EQ(idx.position(3), 0u);
}

TEST(SnippetIndex, EmptyCorpusRejected) {
  EXPECT_EQ(code_of([] { SnippetIndex::build(Corpus(), Modality::score); }), ErrorCode::EmptyCorpus);
}

TEST(SnippetIndex, LaidOutInIdOrder) {
  std::mt19937_64 rng(2);
  const Corpus c = score_corpus({{"z", 2}, {"a", 2}, {"m", 1}}, 8, rng);
  const SnippetIndex idx = SnippetIndex::build(c, Modality::score);
  EXPECT_EQ(idx.pieces(), (std::vector<std::string>{"a", "m", "z"}));
  for (std::size_t e = 0; e < idx.size(); ++e) {
    const SnippetSequence& s = *c[*c.find(idx.piece_id(e))].score;
    EXPECT_TRUE(std::ranges::equal(idx.row(e), s.row(idx.position(e))));
  }
}

TEST(NearestSnippet, ExactEntryFound) {
  std::mt19937_64 rng(3);
  const Corpus c = score_corpus({{"a", 4}, {"b", 6}}, 16, rng);
  const SnippetIndex idx = SnippetIndex::build(c, Modality::score);
  const SnippetHit h = nearest_snippet((*c[1].score)[4], idx);
  EXPECT_EQ(h.piece_id, "b");
  EXPECT_EQ(h.position, 4u);
  EXPECT_NEAR(h.distance, 0.0, 1e-15);
}

TEST(NearestSnippet, EquidistantPrefersSmallerIdThenPosition) {
  const std::vector<double> e1 = {1.0, 0.0}, e2 = {0.0, 1.0};
  auto seq = [](const std::string& id, std::vector<double> rows) {
    return SnippetSequence(id, Modality::score, 2, rows);
  };
  std::vector<Piece> pieces(2);
  pieces[0].id = "b";
  pieces[0].score = seq("b", {1.0, 0.0});
  pieces[1].id = "a";
  pieces[1].score = seq("a", {0.0, 1.0, 1.0, 0.0, 1.0, 0.0});
  const SnippetIndex idx = SnippetIndex::build(Corpus(pieces), Modality::score);
  const SnippetHit h = nearest_snippet(EmbeddingVector(e1), idx);
  EXPECT_EQ(h.piece_id, "a");
  EXPECT_EQ(h.position, 1u);
  // Halfway between e1 and e2: every entry is equidistant.
  const SnippetHit mid = nearest_snippet(EmbeddingVector({1.0, 1.0}), idx);
  EXPECT_EQ(mid.piece_id, "a");
  EXPECT_EQ(mid.position, 0u);
  (void)e2;
}

TEST(NearestSnippet, EqualsLinearScanOracle) {
  std::mt19937_64 rng(4);
  const Corpus c = score_corpus({{"p0", 20}, {"p1", 35}, {"p2", 15}, {"p3", 30}}, 16, rng);
  const SnippetIndex idx = SnippetIndex::build(c, Modality::score);
  ASSERT_EQ(idx.size(), 100u);
  for (int t = 0; t < 200; ++t) {
    const EmbeddingVector x(gaussian_rows(1, 16, rng));
    EXPECT_EQ(nearest_snippet(x, idx), scan(normalize(x), c));
  }
}

TEST(NearestSnippet, DimensionMismatch) {
  std::mt19937_64 rng(5);
  const SnippetIndex idx = SnippetIndex::build(score_corpus({{"a", 3}}, 8, rng), Modality::score);
  EXPECT_EQ(code_of([&] { nearest_snippet(EmbeddingVector({1.0, 0.0}), idx); }), ErrorCode::DimensionMismatch);
}

TEST(RankVotes, OrderedByVotesThenMeanThenId) {
  std::vector<VoteTally> t(4);
  t[0].distances = {0.3};        // a: 1 vote
  t[1].distances = {0.5, 0.1};   // b: 2 votes, mean 0.3
  t[2].distances = {0.2, 0.2};   // c: 2 votes, mean 0.2
  const RankedList rl = rank_votes(t, {"a", "b", "c", "d"}, "q");
  ASSERT_EQ(rl.items.size(), 3u);
  EXPECT_EQ(rl.items[0], (RankedItem{"c", 2.0}));
  EXPECT_EQ(rl.items[1], (RankedItem{"b", 2.0}));
  EXPECT_EQ(rl.items[2], (RankedItem{"a", 1.0}));
  EXPECT_EQ(rl.unscored, (std::vector<std::string>{"d"}));
  EXPECT_EQ(rl.order, ScoreOrder::descending_score);

  std::vector<VoteTally> tied(2);
  tied[0].distances = {0.4};
  tied[1].distances = {0.4};
  EXPECT_EQ(rank_votes(tied, {"y", "x"}, "q").items[0].piece_id, "x");
}

TEST(RankVotes, TwoVotesBeatOne) {
  std::vector<VoteTally> t(2);
  t[0].distances = {0.9, 0.9};
  t[1].distances = {0.0};
  const RankedList rl = rank_votes(t, {"A", "B"}, "q");
  EXPECT_EQ(rl.items[0].piece_id, "A");
  EXPECT_EQ(rl.items[1].piece_id, "B");
}

TEST(RankVotes, MeanDoesNotDependOnArrivalOrder) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<VoteTally> t(2);
    for (int k = 0; k < 7; ++k) t[0].distances.push_back(u(rng));
    t[1].distances = t[0].distances;
    std::shuffle(t[1].distances.begin(), t[1].distances.end(), rng);
    // Identical multisets tie exactly, so the id decides.
    EXPECT_EQ(rank_votes(t, {"b", "a"}, "q").items[0].piece_id, "a");
  }
}

TEST(VoteRank, SelfQueryWinsWithEveryVote) {
  std::mt19937_64 rng(7);
  const Corpus c = score_corpus({{"a", 12}, {"b", 9}, {"c", 14}}, 32, rng);
  const SnippetIndex idx = SnippetIndex::build(c, Modality::score);
  const RankedList rl = vote_rank(c[1].score->with_id("q"), idx);
  EXPECT_EQ(rl.items[0], (RankedItem{"b", 9.0}));
  EXPECT_EQ(rl.items.size(), 1u);
  EXPECT_EQ(rl.unscored, (std::vector<std::string>{"a", "c"}));
}

TEST(VoteRank, EqualsNearestSnippetComposition) {
  std::mt19937_64 rng(8);
  const Corpus c = score_corpus({{"p0", 30}, {"p1", 25}, {"p2", 40}, {"p3", 10}, {"p4", 35}}, 16, rng);
  const SnippetIndex idx = SnippetIndex::build(c, Modality::score);
  for (int t = 0; t < 20; ++t) {
    const auto q = random_sequence("q", Modality::audio, 1 + rng() % 40, 16, rng);
    std::map<std::string, std::vector<double>> votes;
    for (std::size_t i = 0; i < q.size(); ++i) {
      const SnippetHit h = nearest_snippet(q[i], idx);
      votes[h.piece_id].push_back(h.distance);
    }
    std::vector<VoteTally> tallies(idx.pieces().size());
    for (std::size_t s = 0; s < idx.pieces().size(); ++s) tallies[s].distances = votes[idx.pieces()[s]];
    const RankedList expect = rank_votes(tallies, idx.pieces(), "q");
    const RankedList got = vote_rank(q, idx);
    EXPECT_EQ(got, expect);
    std::size_t total = 0;
    for (const auto& it : got.items) total += static_cast<std::size_t>(it.score);
    EXPECT_EQ(total, q.size());
    EXPECT_EQ(got.total(), c.size());
  }
}

TEST(VoteRank, InvariantToCorpusOrder) {
  std::mt19937_64 rng(9);
  std::vector<std::pair<std::string, std::size_t>> shape = {{"a", 10}, {"b", 12}, {"c", 8}, {"d", 20}};
  const Corpus c = score_corpus(shape, 16, rng);
  const auto q = random_sequence("q", Modality::audio, 25, 16, rng);
  const RankedList base = vote_rank(q, SnippetIndex::build(c, Modality::score));
  std::vector<std::size_t> order = {3, 1, 0, 2};
  EXPECT_EQ(vote_rank(q, SnippetIndex::build(c.subset(order), Modality::score)), base);
}
