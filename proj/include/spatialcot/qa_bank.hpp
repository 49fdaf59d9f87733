// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spatialcot/rng.hpp"

namespace spatialcot {

enum class Level { pixel, object, scene, caption };

/// Question family within a level. Pixel level has single-point depth and
/// two-point comparison; object level has bounding cubes and the left-of
/// predicate; scene level has distance.
enum class Family { single_point, close, bounding_cube, left, distance };

enum class Kind { question, answer, true_response, false_response };

std::string_view to_string(Level level);
std::string_view to_string(Family family);
std::string_view to_string(Kind kind);
Level parse_level(std::string_view s);
Family parse_family(std::string_view s);
Kind parse_kind(std::string_view s);

struct TemplateCell {
  Level level = Level::pixel;
  Family family = Family::single_point;
  Kind kind = Kind::question;

  auto operator<=>(const TemplateCell&) const = default;
};

struct Template {
  Level level = Level::pixel;
  Family family = Family::single_point;
  Kind kind = Kind::question;
  /// Slot letters in order of first appearance, drawn from {A, B, X, Y}.
  std::string slots;
  std::string text;
  /// Position inside its cell; recorded in turn provenance.
  std::size_t index = 0;

  bool has_slot(char s) const { return slots.find(s) != std::string::npos; }
};

/// Slot letters appearing in `text` as `[A]`, `[B]`, `[X]` or `[Y]`.
std::string scan_slots(std::string_view text);

class TemplateBank {
 public:
  /// The stock template tables.
  static const TemplateBank& builtin();

  /// Reads tab-separated `level family kind text` records, one per line.
  /// Blank lines and lines starting with `#` are skipped.
  static TemplateBank from_file(const std::filesystem::path& path);
  static TemplateBank from_string(std::string_view content);

  void add(TemplateCell cell, std::string text);

  /// All templates of a cell; empty span if the cell has none.
  std::span<const Template> cell(TemplateCell c) const;

  /// Uniform draw from the cell. Throws ConfigurationError on an empty cell.
  const Template& sample(TemplateCell c, Rng& rng) const;
  const Template& sample(TemplateCell c, std::uint64_t seed) const;

  /// Throws ConfigurationError if a cell used by synthesis is empty.
  void require_complete() const;

  const std::map<TemplateCell, std::vector<Template>>& cells() const { return cells_; }

 private:
  std::map<TemplateCell, std::vector<Template>> cells_;
};

/// Slot letter -> replacement text.
using Bindings = std::map<char, std::string>;

/// Replaces every slot occurrence in one pass. Throws InstantiationError
/// naming the unbound slots.
std::string instantiate(const Template& t, const Bindings& bindings);
std::string instantiate(std::string_view text, const Bindings& bindings);

enum class UnitStyle { words, abbreviated };

struct RenderedValue {
  std::string text;
  double raw_meters = 0.0;
};

/// Below 0.5 m: centimeters with one decimal. Otherwise meters rounded
/// half-up to three decimals, trailing zeros trimmed to one decimal.
/// Throws DomainError unless meters is positive and finite.
RenderedValue render_depth(double meters, UnitStyle style = UnitStyle::words);

/// Same rules as render_depth but zero is allowed.
RenderedValue render_distance(double meters, UnitStyle style = UnitStyle::words);

/// Inverse of the renderers: "1.235 meters" -> 1.235, "5.0 cm" -> 0.05.
double parse_rendered(std::string_view text);

/// Fixed three-decimal meters, half away from zero, never "-0.000".
std::string format_coordinate(double meters);

/// Decimal rounding of |value| * 10^shift to `frac_digits` places, half-up,
/// computed on the shortest round-trip decimal form of `value`.
std::string round_decimal(double value, int shift, int frac_digits);

}  // namespace spatialcot
