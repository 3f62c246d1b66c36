#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "stressprog/errors.hpp"
#include "stressprog/labelling.hpp"
#include "stressprog/vad.hpp"

using namespace stressprog;

namespace {

const VadCode kHappy = encode_emotion(Emotion::Happiness);
const VadCode kSad = encode_emotion(Emotion::Sadness);
const VadCode kAnger = encode_emotion(Emotion::Anger);
const VadCode kFear = encode_emotion(Emotion::Fear);
const VadCode kDisgust = encode_emotion(Emotion::Disgust);

}  // namespace

TEST(VadCode, EmotionTable) {
  EXPECT_EQ(kHappy, VadCode(1, 1, 1));
  EXPECT_EQ(kSad, VadCode(0, 0, 0));
  EXPECT_EQ(kAnger, VadCode(0, 1, 1));
  EXPECT_EQ(kFear, VadCode(0, 1, 0));
  EXPECT_EQ(kDisgust, VadCode(0, 1, 1));
  EXPECT_EQ(encode_emotion(Emotion::Neutral), VadCode(0, 0, 0));
}

TEST(VadCode, StressAliasesFear) {
  EXPECT_EQ(kStressCode, kFear);
  EXPECT_TRUE(is_stress(kFear));
  EXPECT_FALSE(is_stress(kAnger));
  EXPECT_EQ(kAnger, kDisgust);  // indistinguishable once encoded
}

TEST(VadCode, RejectsNonBinaryFields) {
  EXPECT_THROW(VadCode(2, 0, 0), std::invalid_argument);
  EXPECT_THROW(VadCode(0, -1, 0), std::invalid_argument);
}

TEST(VadCode, IndexRoundTrip) {
  for (int i = 0; i < 8; ++i) EXPECT_EQ(VadCode::from_index(i).index(), i);
  EXPECT_EQ(VadCode::from_index(4), VadCode(1, 0, 0));
}

TEST(VadCode, HammingIsAMetricOnAllCodes) {
  for (int a = 0; a < 8; ++a) {
    for (int b = 0; b < 8; ++b) {
      const auto x = VadCode::from_index(a), y = VadCode::from_index(b);
      EXPECT_EQ(hamming_distance(x, y), hamming_distance(y, x));
      EXPECT_EQ(hamming_distance(x, y) == 0, a == b);
      EXPECT_LE(hamming_distance(x, y), 3);
      for (int c = 0; c < 8; ++c) {
        const auto z = VadCode::from_index(c);
        EXPECT_LE(hamming_distance(x, z), hamming_distance(x, y) + hamming_distance(y, z));
      }
    }
  }
}

TEST(VadCode, DistancesToStress) {
  EXPECT_EQ(hamming_distance(kHappy, kStressCode), 2);
  EXPECT_EQ(hamming_distance(kSad, kStressCode), 1);
  EXPECT_EQ(hamming_distance(kAnger, kStressCode), 1);
  EXPECT_EQ(hamming_distance(kFear, kStressCode), 0);
}

TEST(VadCode, ParseLabel) {
  EXPECT_EQ(parse_label("0,1,1"), kAnger);
  EXPECT_EQ(parse_label("Happy"), kHappy);
  EXPECT_EQ(parse_label("fear"), kFear);
  EXPECT_EQ(parse_label("stress"), kStressCode);
  EXPECT_EQ(parse_label("neutral"), VadCode(0, 0, 0));
  EXPECT_EQ(parse_label("1,1,1").to_string(), "1,1,1");
  EXPECT_THROW(parse_label("bored"), DataError);
  EXPECT_THROW(parse_label("0,2,1"), DataError);
  EXPECT_THROW(parse_label(""), DataError);
}

// ---- labelling values (high-precision references) ----

TEST(Labelling, DecayWeight) {
  EXPECT_DOUBLE_EQ(decay_weight(0.8, 0), 1.0);
  EXPECT_NEAR(decay_weight(0.8, 1), 0.449329, 1e-6);
  EXPECT_NEAR(decay_weight(0.01, 3), 0.970446, 1e-6);
  EXPECT_THROW(decay_weight(0.8, -1), std::invalid_argument);
  EXPECT_THROW(decay_weight(0.0, 1), std::invalid_argument);
}

TEST(Labelling, ThetaTotalValues) {
  const std::vector<VadCode> h1{kHappy, kFear};
  EXPECT_NEAR(theta_total(h1, 0.8), 0.898658, 1e-6);
  const std::vector<VadCode> h2{kAnger, kAnger, kAnger};
  EXPECT_NEAR(theta_total(h2, 0.8), 1.651225, 1e-6);
  const std::vector<VadCode> fear{kFear, kFear, kFear};
  EXPECT_EQ(theta_total(fear, 0.8), 0.0);
  EXPECT_THROW(theta_total({}, 0.8), std::invalid_argument);
}

TEST(Labelling, ThetaMaxAndThreshold) {
  EXPECT_NEAR(theta_max(1, 0.8), 2.898658, 1e-6);
  EXPECT_NEAR(theta_max(4, 0.8), 3.565411, 1e-6);
  EXPECT_DOUBLE_EQ(theta_max(0, 0.3), 2.0);
  EXPECT_NEAR((LabellingConfig{3, 0.8, 0.5}.threshold()), 1.741943, 1e-6);
}

TEST(Labelling, WeightedDistancesOrdering) {
  const std::vector<VadCode> h{kHappy, kSad, kFear};
  const auto w = weighted_distances(h, 0.8);
  ASSERT_EQ(w.size(), 3u);
  EXPECT_NEAR(w[0].delta, std::exp(-1.6), 1e-15);
  EXPECT_EQ(w[0].distance, 2);
  EXPECT_DOUBLE_EQ(w[2].delta, 1.0);
  EXPECT_EQ(w[2].theta, 0.0);
}

TEST(Labelling, AssignLabelExamples) {
  const LabellingConfig cfg{4, 0.8, 0.5};
  const std::vector<VadCode> fears{kFear, kFear};
  EXPECT_EQ(assign_label(fears, kFear, cfg), kStressCode);
  // No history, happy: theta 2 > T.
  EXPECT_EQ(assign_label({}, kHappy, cfg), kHappy);
  // Single sad window: theta 1 <= T.
  EXPECT_EQ(assign_label({}, kSad, cfg), kStressCode);
  const std::vector<VadCode> too_long(5, kFear);
  EXPECT_THROW(assign_label(too_long, kFear, cfg), std::invalid_argument);
}

TEST(Labelling, ConfigValidation) {
  EXPECT_THROW((LabellingConfig{-1, 0.8, 0.5}.validate()), std::invalid_argument);
  EXPECT_THROW((LabellingConfig{2, 0.0, 0.5}.validate()), std::invalid_argument);
  EXPECT_THROW((LabellingConfig{2, 0.8, -0.1}.validate()), std::invalid_argument);
  EXPECT_NO_THROW((LabellingConfig{0, 1.0, 0.0}.validate()));
}

TEST(Labelling, RelabelSequenceExamples) {
  const LabellingConfig cfg{2, 0.8, 0.5};
  const std::vector<VadCode> fears(5, kFear);
  EXPECT_EQ(relabel_sequence(fears, cfg), std::vector<VadCode>(5, kStressCode));
  const std::vector<VadCode> mixed{kSad, kFear, kFear};
  EXPECT_EQ(relabel_sequence(mixed, cfg), (std::vector<VadCode>{kStressCode, kStressCode, kStressCode}));
  const std::vector<VadCode> happy(4, kHappy);
  EXPECT_EQ(relabel_sequence(happy, cfg), happy);
  EXPECT_THROW(relabel_sequence({}, cfg), std::invalid_argument);
}

// ---- properties ----

TEST(LabellingProperty, LambdaInvariantAtNZero) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<VadCode> seq;
    for (int k = 0; k < 12; ++k) seq.push_back(VadCode::from_index(static_cast<int>(rng() % 8)));
    const auto ref = relabel_sequence(seq, {0, 0.01, 0.5});
    for (double lambda : {0.1, 0.8, 1.0, 5.0}) EXPECT_EQ(relabel_sequence(seq, {0, lambda, 0.5}), ref);
  }
}

TEST(LabellingProperty, LargeLambdaOnlyCurrentWindowMatters) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<VadCode> seq;
    for (int k = 0; k < 10; ++k) seq.push_back(VadCode::from_index(static_cast<int>(rng() % 8)));
    EXPECT_EQ(relabel_sequence(seq, {5, 60.0, 0.5}), relabel_sequence(seq, {0, 60.0, 0.5}));
  }
}

TEST(LabellingProperty, StressAbsorption) {
  for (int n = 0; n <= 5; ++n) {
    for (double lambda : {0.01, 0.8, 1.0}) {
      for (double tau : {0.0, 0.25, 1.0}) {
        const std::vector<VadCode> fears(n + 1, kFear);
        EXPECT_EQ(relabel_sequence(fears, {n, lambda, tau}).back(), kStressCode);
      }
    }
  }
}

TEST(LabellingProperty, OutputIsStressOrCurrent) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<VadCode> seq;
    for (int k = 0; k < 8; ++k) seq.push_back(VadCode::from_index(static_cast<int>(rng() % 8)));
    const LabellingConfig cfg{static_cast<int>(rng() % 6), 0.1 + (rng() % 10) / 10.0, (rng() % 5) / 4.0};
    const auto out = relabel_sequence(seq, cfg);
    for (std::size_t t = 0; t < seq.size(); ++t) EXPECT_TRUE(out[t] == kStressCode || out[t] == seq[t]);
  }
}

TEST(LabellingProperty, OlderWindowsWeighLess) {
  for (double lambda : {0.01, 0.8, 1.0}) {
    for (int age = 0; age < 6; ++age) EXPECT_GT(decay_weight(lambda, age), decay_weight(lambda, age + 1));
  }
}

TEST(LabellingProperty, ThetaBoundedByThetaMax) {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = static_cast<int>(rng() % 6);
    std::vector<VadCode> h;
    for (int k = 0; k <= n; ++k) h.push_back(VadCode::from_index(static_cast<int>(rng() % 8)));
    const double lambda = 0.05 + (rng() % 20) / 10.0;
    const double total = theta_total(h, lambda);
    EXPECT_GE(total, 0.0);
    // Distance 3 is reachable only for (1,0,1); the maximum counts 2 per window.
    bool has_three = false;
    for (const auto& c : h) has_three |= hamming_distance(c, kStressCode) == 3;
    if (!has_three) EXPECT_LE(total, theta_max(n, lambda) + 1e-12);
  }
}

TEST(LabellingProperty, MatchesOracleOnRandomSequences) {
  std::mt19937 rng(23);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<VadCode> seq;
    std::vector<oracle::Bits> bits;
    const int len = 1 + static_cast<int>(rng() % 15);
    for (int k = 0; k < len; ++k) {
      seq.push_back(VadCode::from_index(static_cast<int>(rng() % 8)));
      bits.push_back(oracle::bits_of(seq.back()));
    }
    const int n = static_cast<int>(rng() % 6);
    const double lambda = std::vector<double>{0.01, 0.1, 0.8, 1.0}[rng() % 4];
    const double tau = std::vector<double>{0.25, 0.5, 0.75}[rng() % 3];
    const auto got = relabel_sequence(seq, {n, lambda, tau});
    const auto want = oracle::relabel(bits, n, lambda, tau);
    for (int k = 0; k < len; ++k) EXPECT_EQ(oracle::bits_of(got[static_cast<std::size_t>(k)]), want[static_cast<std::size_t>(k)]);
  }
}
