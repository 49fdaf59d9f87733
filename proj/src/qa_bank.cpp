// SPDX-License-Identifier: Apache-2.0
#include "spatialcot/qa_bank.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "spatialcot/errors.hpp"

namespace spatialcot {

std::string_view to_string(Level level) {
  switch (level) {
    case Level::pixel: return "pixel";
    case Level::object: return "object";
    case Level::scene: return "scene";
    case Level::caption: return "caption";
  }
  return "?";
}

std::string_view to_string(Family family) {
  switch (family) {
    case Family::single_point: return "single_point";
    case Family::close: return "close";
    case Family::bounding_cube: return "bounding_cube";
    case Family::left: return "left";
    case Family::distance: return "distance";
  }
  return "?";
}

std::string_view to_string(Kind kind) {
  switch (kind) {
    case Kind::question: return "question";
    case Kind::answer: return "answer";
    case Kind::true_response: return "true_response";
    case Kind::false_response: return "false_response";
  }
  return "?";
}

Level parse_level(std::string_view s) {
  for (Level l : {Level::pixel, Level::object, Level::scene, Level::caption}) {
    if (to_string(l) == s) return l;
  }
  throw ConfigurationError("unknown level '" + std::string(s) + "'");
}

Family parse_family(std::string_view s) {
  for (Family f : {Family::single_point, Family::close, Family::bounding_cube, Family::left,
                   Family::distance}) {
    if (to_string(f) == s) return f;
  }
  throw ConfigurationError("unknown template family '" + std::string(s) + "'");
}

Kind parse_kind(std::string_view s) {
  for (Kind k : {Kind::question, Kind::answer, Kind::true_response, Kind::false_response}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigurationError("unknown template kind '" + std::string(s) + "'");
}

std::string scan_slots(std::string_view text) {
  std::string slots;
  for (std::size_t i = 0; i + 2 < text.size(); ++i) {
    if (text[i] != '[' || text[i + 2] != ']') continue;
    const char c = text[i + 1];
    if ((c == 'A' || c == 'B' || c == 'X' || c == 'Y') && slots.find(c) == std::string::npos) {
      slots.push_back(c);
    }
  }
  return slots;
}

namespace {

TemplateBank make_builtin() {
  TemplateBank bank;
  auto add = [&](Level l, Family f, Kind k, std::initializer_list<const char*> texts) {
    for (const char* t : texts) bank.add({l, f, k}, t);
  };

  add(Level::pixel, Family::single_point, Kind::question,
      {"What is the depth value at pixel point [A]?", "How far away is point [A]?",
       "Tell me the depth of point [A]."});
  add(Level::pixel, Family::single_point, Kind::answer,
      {"[X] away.", "It is [X].", "Depth value of point [A] is [X]."});
  add(Level::pixel, Family::close, Kind::question,
      {"Which point is close to a viewer? Point: [A], Point: [B].",
       "Is point [A] closer than [B]?",
       "Which point has a smaller depth value? Point [A] or Point [B]?",
       "Compare the depth of point [A] and point [B]."});
  add(Level::pixel, Family::close, Kind::true_response,
      {"Yes, point [A] is closer to the viewer than point [B].",
       "Indeed, point [A] has a smaller depth value than point [B].",
       "Correct, point [A] is closer than point [B]."});
  add(Level::pixel, Family::close, Kind::false_response,
      {"No, point [A] is not closer than point [B].",
       "In fact, point [B] is closer to the viewer than point [A].",
       "Incorrect, point [B] has a smaller depth value than point [A]."});

  add(Level::object, Family::bounding_cube, Kind::question,
      {"Identify [A] and [B]", "What is the center of the 3d bounding box coordinate for [A]?"});
  add(Level::object, Family::bounding_cube, Kind::answer,
      {"[X]", "Center: [X]", "[A] in [X] and [B] in [Y]"});
  add(Level::object, Family::left, Kind::question,
      {"Is the [A] to the left of the [B] from the viewer's perspective?",
       "Does the [A] appear on the left side of the [B]?",
       "Can you confirm if the [A] is positioned to the left of the [B]?"});
  add(Level::object, Family::left, Kind::true_response,
      {"Yes, the [A] is to the left of the [B].",
       "Indeed, the [A] is positioned on the left side of the [B].",
       "Correct, you'll find the [A] to the left of the [B]."});
  add(Level::object, Family::left, Kind::false_response,
      {"No, the [A] is not to the left of the [B].",
       "In fact, the [A] is either to the right of or directly aligned with the [B].",
       "Incorrect, the [A] is not on the left side of the [B]."});

  add(Level::scene, Family::distance, Kind::question,
      {"What is the distance between the [A] and the [B]?", "How far is the [A] from the [B]?",
       "How distant is the [A] from the [B]?", "Measure the distance from the [A] to the [B]."});
  add(Level::scene, Family::distance, Kind::answer,
      {"[X]", "the [A] and the [B] are [X] apart.", "They are [X] apart.",
       "The distance of the [A] from the [B] is [X]."});
  return bank;
}

}  // namespace

const TemplateBank& TemplateBank::builtin() {
  static const TemplateBank bank = make_builtin();
  return bank;
}

void TemplateBank::add(TemplateCell cell, std::string text) {
  if (text.empty()) throw ConfigurationError("template text is empty");
  auto& list = cells_[cell];
  Template t;
  t.level = cell.level;
  t.family = cell.family;
  t.kind = cell.kind;
  t.slots = scan_slots(text);
  t.text = std::move(text);
  t.index = list.size();
  list.push_back(std::move(t));
}

TemplateBank TemplateBank::from_string(std::string_view content) {
  TemplateBank bank;
  std::istringstream in{std::string(content)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (int i = 0; i < 3; ++i) {
      const auto tab = line.find('\t', start);
      if (tab == std::string::npos) {
        throw ConfigurationError("template bank line " + std::to_string(lineno) +
                                 ": expected 4 tab-separated fields");
      }
      fields.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    fields.push_back(line.substr(start));
    bank.add({parse_level(fields[0]), parse_family(fields[1]), parse_kind(fields[2])},
             fields[3]);
  }
  return bank;
}

TemplateBank TemplateBank::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open template bank " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_string(ss.str());
}

std::span<const Template> TemplateBank::cell(TemplateCell c) const {
  auto it = cells_.find(c);
  if (it == cells_.end()) return {};
  return it->second;
}

const Template& TemplateBank::sample(TemplateCell c, Rng& rng) const {
  auto list = cell(c);
  if (list.empty()) {
    throw ConfigurationError("template bank has no entries for " + std::string(to_string(c.level)) +
                             "/" + std::string(to_string(c.family)) + "/" +
                             std::string(to_string(c.kind)));
  }
  return list[rng.index(list.size())];
}

const Template& TemplateBank::sample(TemplateCell c, std::uint64_t seed) const {
  Rng rng(seed);
  return sample(c, rng);
}

void TemplateBank::require_complete() const {
  const TemplateCell needed[] = {
      {Level::pixel, Family::single_point, Kind::question},
      {Level::pixel, Family::single_point, Kind::answer},
      {Level::pixel, Family::close, Kind::question},
      {Level::pixel, Family::close, Kind::true_response},
      {Level::pixel, Family::close, Kind::false_response},
      {Level::object, Family::bounding_cube, Kind::question},
      {Level::object, Family::bounding_cube, Kind::answer},
      {Level::object, Family::left, Kind::question},
      {Level::object, Family::left, Kind::true_response},
      {Level::object, Family::left, Kind::false_response},
      {Level::scene, Family::distance, Kind::question},
      {Level::scene, Family::distance, Kind::answer},
  };
  for (const auto& c : needed) {
    if (cell(c).empty()) {
      throw ConfigurationError("template bank has no entries for " +
                               std::string(to_string(c.level)) + "/" +
                               std::string(to_string(c.family)) + "/" +
                               std::string(to_string(c.kind)));
    }
  }
}

std::string instantiate(std::string_view text, const Bindings& bindings) {
  std::string out;
  out.reserve(text.size() + 32);
  std::string missing;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '[' && i + 2 < text.size() && text[i + 2] == ']') {
      const char c = text[i + 1];
      if (c == 'A' || c == 'B' || c == 'X' || c == 'Y') {
        auto it = bindings.find(c);
        if (it == bindings.end()) {
          if (missing.find(c) == std::string::npos) missing.push_back(c);
        } else {
          out += it->second;
        }
        i += 2;
        continue;
      }
    }
    out.push_back(text[i]);
  }
  if (!missing.empty()) {
    std::string list;
    for (char c : missing) {
      if (!list.empty()) list += ", ";
      list += std::string("[") + c + "]";
    }
    throw InstantiationError("unbound template slots: " + list);
  }
  if (!scan_slots(out).empty()) {
    throw InstantiationError("binding value reintroduced a slot marker: " + out);
  }
  return out;
}

std::string instantiate(const Template& t, const Bindings& bindings) {
  return instantiate(t.text, bindings);
}

std::string round_decimal(double value, int shift, int frac_digits) {
  char buf[512];
  const auto res = std::to_chars(buf, buf + sizeof buf, std::fabs(value), std::chars_format::fixed);
  if (res.ec != std::errc{}) throw DomainError("value cannot be formatted");
  std::string repr(buf, res.ptr);

  std::string int_part = repr;
  std::string frac_part;
  if (auto dot = repr.find('.'); dot != std::string::npos) {
    int_part = repr.substr(0, dot);
    frac_part = repr.substr(dot + 1);
  }
  // Move the decimal point right by `shift`.
  std::string digits = int_part + frac_part;
  auto point = static_cast<long>(int_part.size()) + shift;
  while (point > static_cast<long>(digits.size())) digits.push_back('0');

  // Keep digits [0, point + frac_digits); inspect the first dropped one.
  const auto keep = static_cast<std::size_t>(point + frac_digits);
  while (digits.size() <= keep) digits.push_back('0');
  const bool round_up = digits[keep] >= '5';
  digits.resize(keep);
  if (round_up) {
    long i = static_cast<long>(digits.size()) - 1;
    for (; i >= 0; --i) {
      if (digits[static_cast<std::size_t>(i)] == '9') {
        digits[static_cast<std::size_t>(i)] = '0';
      } else {
        ++digits[static_cast<std::size_t>(i)];
        break;
      }
    }
    if (i < 0) {
      digits.insert(digits.begin(), '1');
      ++point;
    }
  }
  std::string whole = digits.substr(0, static_cast<std::size_t>(point));
  const std::string frac = digits.substr(static_cast<std::size_t>(point));
  const auto nz = whole.find_first_not_of('0');
  whole = nz == std::string::npos ? "0" : whole.substr(nz);
  return frac_digits > 0 ? whole + "." + frac : whole;
}

namespace {

RenderedValue render_quantity(double meters, UnitStyle style) {
  const bool words = style == UnitStyle::words;
  if (meters < 0.5) {
    return {round_decimal(meters, 2, 1) + (words ? " centimeters" : " cm"), meters};
  }
  std::string s = round_decimal(meters, 0, 3);
  while (s.size() >= 2 && s.back() == '0' && s[s.size() - 2] != '.') s.pop_back();
  return {s + (words ? " meters" : " m"), meters};
}

}  // namespace

RenderedValue render_depth(double meters, UnitStyle style) {
  if (!std::isfinite(meters) || !(meters > 0.0)) {
    throw DomainError("render_depth: depth must be positive and finite");
  }
  return render_quantity(meters, style);
}

RenderedValue render_distance(double meters, UnitStyle style) {
  if (!std::isfinite(meters) || meters < 0.0) {
    throw DomainError("render_distance: distance must be non-negative and finite");
  }
  return render_quantity(meters, style);
}

double parse_rendered(std::string_view text) {
  const auto space = text.find(' ');
  if (space == std::string_view::npos) throw DomainError("rendered value has no unit");
  double number = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + space, number);
  if (res.ec != std::errc{} || res.ptr != text.data() + space) {
    throw DomainError("rendered value has a malformed number");
  }
  const auto unit = text.substr(space + 1);
  if (unit == "meters" || unit == "m") return number;
  if (unit == "centimeters" || unit == "cm") return number / 100.0;
  throw DomainError("rendered value has unknown unit '" + std::string(unit) + "'");
}

std::string format_coordinate(double meters) {
  if (!std::isfinite(meters)) throw DomainError("coordinate is not finite");
  std::string s = round_decimal(meters, 0, 3);
  if (meters < 0.0 && s != "0.000") s.insert(s.begin(), '-');
  return s;
}

}  // namespace spatialcot
