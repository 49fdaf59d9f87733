// SPDX-License-Identifier: Apache-2.0
#include "spatialcot/corpus_filter.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "spatialcot/errors.hpp"

namespace spatialcot {

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

const AdmissionLabelSet& AdmissionLabelSet::builtin() {
  static const AdmissionLabelSet set({
      {"an iPhone photo of an indoor scene", true},
      {"an iphone photo of an outdoor scene", true},
      {"a DSLR photo of an indoor scene", true},
      {"a DSLR of an outdoor scene", true},
      {"a close up shot of a single object", false},
      {"a product displayed in front of a white background", false},
      {"an artwork", false},
      {"a painting", false},
      {"a screenshot of a graphical user interface", false},
      {"a piece of text", false},
      {"a sketch", false},
  });
  return set;
}

AdmissionLabelSet::AdmissionLabelSet(std::vector<AdmissionLabel> labels) : labels_(std::move(labels)) {
  std::set<std::string> pos;
  std::set<std::string> neg;
  for (const auto& l : labels_) (l.positive ? pos : neg).insert(l.text);
  if (pos.empty() || neg.empty()) {
    throw ConfigurationError("label set needs at least one positive and one negative label");
  }
  for (const auto& p : pos) {
    if (neg.count(p)) throw ConfigurationError("label '" + p + "' is both positive and negative");
  }
}

AdmissionLabelSet AdmissionLabelSet::from_string(std::string_view content) {
  std::vector<AdmissionLabel> labels;
  std::istringstream in{std::string(content)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ConfigurationError("label file line " + std::to_string(lineno) + ": missing tab");
    }
    const std::string kind = line.substr(0, tab);
    std::string text = line.substr(tab + 1);
    if (text.empty()) throw ConfigurationError("label file line " + std::to_string(lineno) + ": empty label");
    if (kind == "positive") {
      labels.push_back({std::move(text), true});
    } else if (kind == "negative") {
      labels.push_back({std::move(text), false});
    } else {
      throw ConfigurationError("label file line " + std::to_string(lineno) + ": unknown kind '" + kind + "'");
    }
  }
  return AdmissionLabelSet(std::move(labels));
}

AdmissionLabelSet AdmissionLabelSet::from_file(const std::filesystem::path& path) {
  return from_string(slurp(path));
}

std::vector<std::string> AdmissionLabelSet::positive() const {
  std::vector<std::string> out;
  for (const auto& l : labels_) if (l.positive) out.push_back(l.text);
  return out;
}

std::vector<std::string> AdmissionLabelSet::negative() const {
  std::vector<std::string> out;
  for (const auto& l : labels_) if (!l.positive) out.push_back(l.text);
  return out;
}

bool admit(const LabelScores& scores, const AdmissionLabelSet& labels) {
  if (scores.size() != labels.size()) {
    throw ConfigurationError("expected " + std::to_string(labels.size()) + " label scores, got " +
                             std::to_string(scores.size()));
  }
  double top = -INFINITY;
  for (double s : scores) {
    if (!std::isfinite(s)) throw ConfigurationError("label scores must be finite");
    top = std::max(top, s);
  }
  bool any_positive = false;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] != top) continue;
    if (!labels.labels()[i].positive) return false;
    any_positive = true;
  }
  return any_positive;
}

std::map<std::string, LabelScores> parse_label_scores(std::string_view content, std::size_t expected) {
  std::map<std::string, LabelScores> out;
  std::istringstream in{std::string(content)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.front() == '#') continue;
    std::istringstream fields(line);
    std::string id;
    if (!(fields >> id)) continue;
    LabelScores scores;
    std::string tok;
    while (fields >> tok) {
      try {
        std::size_t used = 0;
        scores.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ConfigurationError("score file line " + std::to_string(lineno) + ": bad number '" + tok + "'");
      }
    }
    if (scores.size() != expected) {
      throw ConfigurationError("score file line " + std::to_string(lineno) + ": expected " +
                               std::to_string(expected) + " scores, got " + std::to_string(scores.size()));
    }
    out[id] = std::move(scores);
  }
  return out;
}

std::map<std::string, LabelScores> read_label_scores(const std::filesystem::path& path, std::size_t expected) {
  return parse_label_scores(slurp(path), expected);
}

}  // namespace spatialcot
