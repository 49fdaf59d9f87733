// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace spatialcot {

struct AdmissionLabel {
  std::string text;
  bool positive = false;
};

/// Ordered label inventory; score vectors are aligned with this order.
class AdmissionLabelSet {
 public:
  /// Four positive and seven negative labels, verbatim.
  static const AdmissionLabelSet& builtin();

  /// Tab-separated `positive|negative<TAB>label` lines; `#` comments allowed.
  static AdmissionLabelSet from_file(const std::filesystem::path& path);
  static AdmissionLabelSet from_string(std::string_view content);

  explicit AdmissionLabelSet(std::vector<AdmissionLabel> labels);

  const std::vector<AdmissionLabel>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  std::vector<std::string> positive() const;
  std::vector<std::string> negative() const;

 private:
  std::vector<AdmissionLabel> labels_;
};

using LabelScores = std::vector<double>;

/// True iff the unique top-scoring label is positive. A tie at the top that
/// includes a negative label rejects. Throws ConfigurationError when the
/// score count differs from the label count or a score is not finite.
bool admit(const LabelScores& scores, const AdmissionLabelSet& labels);

/// `image_id s1 ... sK` lines, whitespace separated. Every row must carry
/// exactly `expected` scores.
std::map<std::string, LabelScores> read_label_scores(const std::filesystem::path& path,
                                                     std::size_t expected);
std::map<std::string, LabelScores> parse_label_scores(std::string_view content,
                                                      std::size_t expected);

}  // namespace spatialcot
