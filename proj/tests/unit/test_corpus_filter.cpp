// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spatialcot/corpus_filter.hpp"
#include "spatialcot/errors.hpp"
#include "spatialcot/rng.hpp"

using namespace spatialcot;

namespace {

// Independent oracle: sort labels by score, admit iff the best is positive
// and strictly above every negative.
bool oracle(const LabelScores& s, const AdmissionLabelSet& labels) {
  double best_pos = -INFINITY, best_neg = -INFINITY;
  for (std::size_t i = 0; i < s.size(); ++i) {
    double& slot = labels.labels()[i].positive ? best_pos : best_neg;
    slot = std::max(slot, s[i]);
  }
  return best_pos > best_neg;
}

}  // namespace

TEST(LabelSet, BuiltinInventory) {
  const auto& set = AdmissionLabelSet::builtin();
  EXPECT_EQ(set.size(), 11u);
  EXPECT_EQ(set.positive().size(), 4u);
  EXPECT_EQ(set.negative().size(), 7u);
  EXPECT_EQ(set.positive().front(), "an iPhone photo of an indoor scene");
  EXPECT_EQ(set.negative().back(), "a sketch");
}

TEST(LabelSet, Validation) {
  EXPECT_THROW(AdmissionLabelSet({{"x", true}}), ConfigurationError);
  EXPECT_THROW(AdmissionLabelSet({{"x", true}, {"x", false}}), ConfigurationError);
  const auto s = AdmissionLabelSet::from_string("# inventory\npositive\ta room\nnegative\ta logo\n");
  EXPECT_EQ(s.size(), 2u);
  EXPECT_THROW(AdmissionLabelSet::from_string("maybe\ta room\nnegative\tb\n"), ConfigurationError);
}

TEST(Admit, Examples) {
  const auto& set = AdmissionLabelSet::builtin();
  LabelScores s(11, 0.0);
  s[0] = 0.9;
  EXPECT_TRUE(admit(s, set));
  s[6] = 0.95;
  EXPECT_FALSE(admit(s, set));
  s[6] = 0.9;  // tie with a negative
  EXPECT_FALSE(admit(s, set));
  s[6] = 0.0;
  s[1] = 0.9;  // tie among positives
  EXPECT_TRUE(admit(s, set));
}

TEST(Admit, ShapeAndFiniteness) {
  const auto& set = AdmissionLabelSet::builtin();
  EXPECT_THROW(admit(LabelScores(10, 0.1), set), ConfigurationError);
  LabelScores s(11, 0.1);
  s[3] = NAN;
  EXPECT_THROW(admit(s, set), ConfigurationError);
}

TEST(Admit, MatchesOracleAndIsShiftAndPermutationInvariant) {
  const auto& set = AdmissionLabelSet::builtin();
  Rng rng(99);
  for (int i = 0; i < 5000; ++i) {
    LabelScores s(11);
    for (auto& x : s) x = std::round(rng.uniform() * 20) / 20;  // coarse grid forces ties
    const bool got = admit(s, set);
    ASSERT_EQ(got, oracle(s, set));

    // Rounding is monotone and grid gaps are wide, so a shift keeps ties and order.
    LabelScores shifted = s;
    const double c = 10 * rng.uniform() - 5;
    for (auto& x : shifted) x += c;
    ASSERT_EQ(admit(shifted, set), got);

    std::vector<std::size_t> perm(11);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<AdmissionLabel> labels;
    LabelScores permuted;
    for (auto k : perm) {
      labels.push_back(set.labels()[k]);
      permuted.push_back(s[k]);
    }
    ASSERT_EQ(admit(permuted, AdmissionLabelSet(labels)), got);
  }
}

TEST(LabelScores, Parsing) {
  const auto m = parse_label_scores("img1 0.1 0.2\nimg2 0.3 0.4\n", 2);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m.at("img2"), (LabelScores{0.3, 0.4}));
  EXPECT_THROW(parse_label_scores("img1 0.1\n", 2), ConfigurationError);
  EXPECT_THROW(parse_label_scores("img1 0.1 x\n", 2), ConfigurationError);
  EXPECT_THROW(read_label_scores("/nonexistent/scores.txt", 2), IoError);
}
