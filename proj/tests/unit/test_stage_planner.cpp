// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "spatialcot/errors.hpp"
#include "spatialcot/stage_planner.hpp"

using namespace spatialcot;

TEST(StagePlanner, Plans) {
  using C = Component;
  EXPECT_EQ(plan(1).trainable, (std::set<C>{C::projector}));
  EXPECT_EQ(plan(2).trainable, (std::set<C>{C::projector, C::llm}));
  EXPECT_EQ(plan(3).trainable, (std::set<C>{C::projector, C::dual_channel_plus}));
  for (int s : {1, 2, 3}) EXPECT_FALSE(plan(s).is_trainable(C::vision_encoder_base));
  EXPECT_THROW(plan(0), DomainError);
  EXPECT_THROW(plan(4), DomainError);
}

TEST(StagePlanner, ExhaustiveUpdateSweep) {
  for (int stage = 1; stage <= 3; ++stage) {
    const auto p = plan(stage);
    for (unsigned mask = 0; mask < 16; ++mask) {
      std::set<Component> touched;
      std::vector<Component> expected;
      for (unsigned b = 0; b < 4; ++b) {
        if (!(mask & (1u << b))) continue;
        touched.insert(kAllComponents[b]);
        if (!p.is_trainable(kAllComponents[b])) expected.push_back(kAllComponents[b]);
      }
      EXPECT_EQ(validate_updates(p, touched), expected) << stage << " " << mask;
    }
  }
}

TEST(StagePlanner, ComponentNamesRoundTrip) {
  for (auto c : kAllComponents) EXPECT_EQ(parse_component(to_string(c)), c);
  EXPECT_THROW(parse_component("decoder"), ConfigurationError);
}
