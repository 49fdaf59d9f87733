// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <set>
#include <string_view>
#include <vector>

namespace spatialcot {

enum class Component { vision_encoder_base, dual_channel_plus, projector, llm };

inline constexpr std::array<Component, 4> kAllComponents = {
    Component::vision_encoder_base, Component::dual_channel_plus, Component::projector, Component::llm};

std::string_view to_string(Component c);
Component parse_component(std::string_view s);

struct FreezePlan {
  int stage = 1;
  std::set<Component> trainable;

  bool is_trainable(Component c) const { return trainable.count(c) != 0; }
};

/// 1: projector. 2: projector and llm. 3: projector and the dual-channel
/// plus branch. Throws DomainError for any other stage.
FreezePlan plan(int stage);

/// Touched components outside the plan, in enum order. Empty means ok.
std::vector<Component> validate_updates(const FreezePlan& plan, const std::set<Component>& touched);

}  // namespace spatialcot
