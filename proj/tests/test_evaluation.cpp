#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "stressprog/evaluation.hpp"
#include "stressprog/labelling.hpp"

using namespace stressprog;

namespace {

struct Fixture {
  std::map<std::string, std::vector<bool>> windows;
  std::map<std::string, bool> truth;
};

Fixture random_recordings(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Fixture f;
  for (std::size_t r = 0; r < count; ++r) {
    const std::string id = "rec" + std::to_string(r);
    const std::size_t len = 1 + rng() % 12;
    for (std::size_t k = 0; k < len; ++k) f.windows[id].push_back((rng() & 1) != 0);
    f.truth[id] = (rng() % 3) != 0;
  }
  return f;
}

void expect_matches(const EvalReport& got, const oracle::Scores& want) {
  EXPECT_EQ(got.confusion.tp, static_cast<std::size_t>(want.tp));
  EXPECT_EQ(got.confusion.fp, static_cast<std::size_t>(want.fp));
  EXPECT_EQ(got.confusion.tn, static_cast<std::size_t>(want.tn));
  EXPECT_EQ(got.confusion.fn, static_cast<std::size_t>(want.fn));
  EXPECT_EQ(got.accuracy, want.accuracy);
  EXPECT_EQ(got.f1, want.f1);
}

std::vector<std::optional<VadCode>> lift(const std::vector<VadCode>& codes) {
  return {codes.begin(), codes.end()};
}

}  // namespace

TEST(MajorityVote, Cases) {
  EXPECT_TRUE(majority_vote({true, true, false}));
  EXPECT_FALSE(majority_vote({false, false, false, true}));
  EXPECT_TRUE(majority_vote({true, false}));  // tie -> stress
  EXPECT_TRUE(majority_vote({true}));
  EXPECT_FALSE(majority_vote({false}));
  EXPECT_THROW(majority_vote({}), std::invalid_argument);
}

TEST(Report, FromCounts) {
  const auto r = EvalReport::from_counts({3, 1, 4, 2});
  EXPECT_DOUBLE_EQ(r.accuracy, 0.7);
  EXPECT_DOUBLE_EQ(r.f1, 6.0 / 9.0);
  EXPECT_EQ(r.count, 10u);
  const auto none = EvalReport::from_counts({0, 0, 5, 0});
  EXPECT_EQ(none.f1, 0.0);  // 0/0
  EXPECT_EQ(none.accuracy, 1.0);
}

TEST(SequenceScore, SimpleCases) {
  const auto all = score_sequence_level({{"a", {true, true}}}, {{"a", true}});
  EXPECT_EQ(all.accuracy, 1.0);
  EXPECT_EQ(all.f1, 1.0);
  const auto half = score_sequence_level({{"a", {true}}, {"b", {true, false, false}}}, {{"a", true}, {"b", true}});
  EXPECT_EQ(half.accuracy, 0.5);
  EXPECT_EQ(half.count, 2u);
}

TEST(SequenceScore, Errors) {
  EXPECT_THROW(score_sequence_level({{"a", {true}}}, {{"b", true}}), std::invalid_argument);
  EXPECT_THROW(score_sequence_level({{"a", {}}}, {{"a", true}}), std::invalid_argument);
  EXPECT_THROW(score_sequence_level({{"a", {true}}}, {{"a", true}, {"b", false}}), std::invalid_argument);
}

TEST(SequenceScore, MatchesReferenceScorer) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Fixture f = random_recordings(50, seed);
    expect_matches(score_sequence_level(f.windows, f.truth), oracle::score_recordings(f.windows, f.truth));
  }
}

TEST(SegmentScore, CasesAndReference) {
  EXPECT_EQ(score_segment_level({true, false}, {true, false}).accuracy, 1.0);
  EXPECT_EQ(score_segment_level({true, true}, {true, false}).accuracy, 0.5);
  EXPECT_THROW(score_segment_level({true}, {true, false}), std::invalid_argument);
  EXPECT_THROW(score_segment_level({}, {}), std::invalid_argument);
  std::mt19937_64 rng(3);
  std::vector<bool> p, t;
  std::vector<std::pair<bool, bool>> pairs;
  for (int i = 0; i < 500; ++i) {
    p.push_back((rng() & 1) != 0);
    t.push_back(rng() % 3 == 0);
    pairs.emplace_back(p.back(), t.back());
  }
  expect_matches(score_segment_level(p, t), oracle::score_pairs(pairs));
}

TEST(ScoreProperty, PermutationInvariance) {
  std::mt19937_64 rng(5);
  std::vector<bool> p, t;
  for (int i = 0; i < 200; ++i) {
    p.push_back((rng() & 1) != 0);
    t.push_back((rng() & 1) != 0);
  }
  const auto base = score_segment_level(p, t);
  std::vector<std::size_t> order(p.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<bool> ps, ts;
    for (auto i : order) {
      ps.push_back(p[i]);
      ts.push_back(t[i]);
    }
    EXPECT_EQ(score_segment_level(ps, ts).confusion, base.confusion);
  }
  // Recordings: relabelled keys reorder the map.
  const Fixture f = random_recordings(30, 6);
  Fixture g;
  for (const auto& [id, w] : f.windows) {
    const std::string key = std::to_string(1000 - std::stoi(id.substr(3)));
    g.windows[key] = w;
    g.truth[key] = f.truth.at(id);
  }
  EXPECT_EQ(score_sequence_level(g.windows, g.truth).confusion, score_sequence_level(f.windows, f.truth).confusion);
}

TEST(ScoreProperty, SwappingRolesTransposesErrors) {
  std::mt19937_64 rng(7);
  std::vector<bool> p, t;
  for (int i = 0; i < 100; ++i) {
    p.push_back((rng() & 1) != 0);
    t.push_back(rng() % 4 == 0);
  }
  const auto a = score_segment_level(p, t).confusion;
  const auto b = score_segment_level(t, p).confusion;
  EXPECT_EQ(a.fp, b.fn);
  EXPECT_EQ(a.fn, b.fp);
  EXPECT_EQ(a.tp, b.tp);
}

// ---- labelling sweep ----

TEST(Sweep, ReferenceFromRelabelGivesFullAgreement) {
  std::mt19937_64 rng(9);
  std::vector<VadCode> emotions;
  for (int i = 0; i < 40; ++i) emotions.push_back(VadCode::from_index(static_cast<int>(rng() % 8)));
  SweepOptions opt;
  opt.ns = {3};
  opt.lambdas = {0.8};
  const auto ref = relabel_sequence(emotions, {3, 0.8, 0.5});
  const auto g = labelling_sweep({{lift(emotions), lift(ref)}}, opt);
  EXPECT_EQ(g.binary(0, 0), 1.0);
  EXPECT_EQ(g.exact(0, 0), 1.0);
  EXPECT_EQ(g.compared, 40u);
}

TEST(Sweep, NZeroRowConstant) {
  std::mt19937_64 rng(10);
  std::vector<SweepSequence> data;
  for (int r = 0; r < 5; ++r) {
    SweepSequence s;
    for (int i = 0; i < 30; ++i) {
      s.emotions.push_back(rng() % 7 == 0 ? std::nullopt : std::optional(VadCode::from_index(static_cast<int>(rng() % 8))));
      s.reference.push_back(rng() % 5 == 0 ? std::nullopt : std::optional(VadCode::from_index(static_cast<int>(rng() % 8))));
    }
    data.push_back(s);
  }
  const auto g = labelling_sweep(data, {});
  ASSERT_EQ(g.binary.rows(), 6);
  ASSERT_EQ(g.binary.cols(), 4);
  for (Eigen::Index j = 1; j < 4; ++j) {
    EXPECT_EQ(g.binary(0, j), g.binary(0, 0));
    EXPECT_EQ(g.exact(0, j), g.exact(0, 0));
  }
}

TEST(Sweep, LaggedFearFixtureImprovesWithHistory) {
  // Fear episodes of two windows over a happy background; the reference
  // marks stress during each episode and for two windows after it.
  const VadCode happy(1, 1, 1), fear(0, 1, 0);
  std::vector<VadCode> emotions, reference;
  for (int rep = 0; rep < 6; ++rep) {
    for (int k = 0; k < 8; ++k) {
      emotions.push_back(k < 2 ? fear : happy);
      reference.push_back(k < 4 ? kStressCode : happy);
    }
  }
  SweepOptions opt;
  opt.tau = 0.75;
  const auto g = labelling_sweep({{lift(emotions), lift(reference)}}, opt);
  for (Eigen::Index j : {0, 1}) {  // lambda 0.01 and 0.1
    EXPECT_LT(g.binary(0, j), g.binary(1, j));
    EXPECT_LT(g.binary(1, j), g.binary(2, j));
  }
  EXPECT_DOUBLE_EQ(g.binary(0, 0), 0.75);
  EXPECT_DOUBLE_EQ(g.binary(2, 0), 1.0);
  // Cross-check every cell against the brute-force labeller.
  std::vector<oracle::Bits> bits;
  for (const auto& e : emotions) bits.push_back(oracle::bits_of(e));
  for (std::size_t i = 0; i < g.ns.size(); ++i) {
    for (std::size_t j = 0; j < g.lambdas.size(); ++j) {
      const auto out = oracle::relabel(bits, g.ns[i], g.lambdas[j], 0.75);
      int agree = 0;
      for (std::size_t k = 0; k < out.size(); ++k) {
        const bool s = out[k] == oracle::Bits{0, 1, 0};
        agree += s == is_stress(reference[k]) ? 1 : 0;
      }
      EXPECT_DOUBLE_EQ(g.binary(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)),
                       agree / static_cast<double>(out.size()));
    }
  }
}

TEST(Sweep, ToleranceUsesNearestLabelledWindow) {
  const VadCode fear(0, 1, 0), happy(1, 1, 1);
  SweepSequence s;
  s.emotions = {fear, std::nullopt, happy};
  s.reference = {kStressCode, kStressCode, happy};
  SweepOptions opt;
  opt.ns = {0};
  opt.lambdas = {0.8};
  opt.tolerance = 0;
  auto g = labelling_sweep({s}, opt);
  EXPECT_EQ(g.compared, 2u);
  EXPECT_EQ(g.binary(0, 0), 1.0);
  opt.tolerance = 1;  // the middle window borrows the earlier neighbour (tie)
  g = labelling_sweep({s}, opt);
  EXPECT_EQ(g.compared, 3u);
  EXPECT_EQ(g.binary(0, 0), 1.0);
}

TEST(Sweep, ErrorsAndCsv) {
  EXPECT_THROW(labelling_sweep({}, {}), std::invalid_argument);
  SweepSequence mismatched;
  mismatched.emotions = {VadCode(0, 1, 0)};
  EXPECT_THROW(labelling_sweep({mismatched}, {}), std::invalid_argument);
  SweepSequence s;
  s.emotions = {VadCode(0, 1, 0), VadCode(1, 1, 1)};
  s.reference = {kStressCode, VadCode(1, 1, 1)};
  const auto g = labelling_sweep({s}, {});
  std::ostringstream out;
  write_sweep_csv(out, g, false);
  const std::string csv = out.str();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "n,0.01,0.1,0.8,1");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
}

TEST(Ablation, Csv) {
  AblationCell c{"m.spck", "mfcc", 3, EvalReport::from_counts({1, 0, 1, 0})};
  std::ostringstream out;
  write_ablation_csv(out, {c});
  EXPECT_EQ(out.str(), "model,features,n,accuracy,f1,count,tp,fp,tn,fn\nm.spck,mfcc,3,1.000000,1.000000,2,1,0,1,0\n");
}
