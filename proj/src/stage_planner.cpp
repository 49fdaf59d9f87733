// SPDX-License-Identifier: Apache-2.0
#include "spatialcot/stage_planner.hpp"

#include <string>

#include "spatialcot/errors.hpp"

namespace spatialcot {

std::string_view to_string(Component c) {
  switch (c) {
    case Component::vision_encoder_base: return "vision_encoder_base";
    case Component::dual_channel_plus: return "dual_channel_plus";
    case Component::projector: return "projector";
    case Component::llm: return "llm";
  }
  return "?";
}

Component parse_component(std::string_view s) {
  for (Component c : kAllComponents) {
    if (to_string(c) == s) return c;
  }
  throw ConfigurationError("unknown component '" + std::string(s) + "'");
}

FreezePlan plan(int stage) {
  switch (stage) {
    case 1: return {1, {Component::projector}};
    case 2: return {2, {Component::projector, Component::llm}};
    case 3: return {3, {Component::projector, Component::dual_channel_plus}};
    default: throw DomainError("training stage must be 1, 2 or 3, got " + std::to_string(stage));
  }
}

std::vector<Component> validate_updates(const FreezePlan& p, const std::set<Component>& touched) {
  std::vector<Component> out;
  for (Component c : touched) {
    if (!p.is_trainable(c)) out.push_back(c);
  }
  return out;
}

}  // namespace spatialcot
