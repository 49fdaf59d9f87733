// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "spatialcot/raster_io.hpp"

namespace spatialcot {

/// Inclusive perceptual-distance window for admitting a frame pair.
struct DistanceBand {
  double lo = 0.35;
  double hi = 0.65;

  bool contains(double d) const { return lo <= d && d <= hi; }
  void validate() const;
};

struct Frame {
  std::string id;
  GrayImage image;  // may be empty for backends that only need ids
};

struct ViewPair {
  std::string ref_a;
  std::string ref_b;
  double distance = 0.0;
  bool admitted = false;
};

struct ViewSet {
  std::vector<std::string> frames;  // trajectory order: anchor, candidates..., anchor
  ViewPair anchor_pair;
  std::map<std::string, bool> validation_votes;  // interpolated frame id -> vote

  std::size_t size() const { return frames.size(); }
};

class PerceptualBackend {
 public:
  virtual ~PerceptualBackend() = default;
  virtual std::string name() const = 0;
  /// Distance in [0, 1]; zero for identical inputs, symmetric.
  virtual double distance(const Frame& a, const Frame& b) const = 0;
};

/// 1 - max(0, Pearson correlation) of 8x8 block-mean luminance. Edge blocks
/// average whatever pixels they cover. Throws ConfigurationError on a size
/// mismatch.
double proxy_distance(const GrayImage& a, const GrayImage& b);

class ProxyBackend final : public PerceptualBackend {
 public:
  std::string name() const override { return "correlation-proxy"; }
  double distance(const Frame& a, const Frame& b) const override {
    return proxy_distance(a.image, b.image);
  }
};

/// Scores looked up from whitespace-separated `frame_a frame_b score`
/// lines, either order. Unknown pairs throw ServiceError.
class PrecomputedBackend final : public PerceptualBackend {
 public:
  static PrecomputedBackend from_file(const std::filesystem::path& path);
  static PrecomputedBackend from_string(const std::string& content);

  void set(const std::string& a, const std::string& b, double score);
  std::string name() const override { return "precomputed"; }
  double distance(const Frame& a, const Frame& b) const override;
  std::size_t size() const { return scores_.size(); }

 private:
  std::map<std::pair<std::string, std::string>, double> scores_;
};

/// All unordered pairs (i < j) in input order. Backend failures surface as
/// ServiceError naming the pair.
std::vector<ViewPair> score_pairs(const std::vector<Frame>& frames, const PerceptualBackend& backend,
                                  const DistanceBand& band = {});

struct ValidationRequest {
  std::string question;
  std::string answer;
  std::vector<std::string> frame_ids;  // anchors followed by the candidate
};

/// Judges whether an anchor QA pair still holds for an interpolated view.
class ValidatorClient {
 public:
  virtual ~ValidatorClient() = default;
  virtual bool validate(const ValidationRequest& request) = 0;
};

class AlwaysTrueValidator final : public ValidatorClient {
 public:
  bool validate(const ValidationRequest&) override { return true; }
};

/// Votes true iff the candidate's proxy distance to both anchors is below
/// `limit`. Ignores the QA text.
class ProxyValidator final : public ValidatorClient {
 public:
  explicit ProxyValidator(std::map<std::string, GrayImage> images, double limit = 0.65)
      : images_(std::move(images)), limit_(limit) {}
  bool validate(const ValidationRequest& request) override;

 private:
  std::map<std::string, GrayImage> images_;
  double limit_;
};

/// Asks the validator once per candidate for each anchor QA pair; a
/// candidate is valid when every pair is confirmed. All candidates join the
/// set iff valid * 2 > count. Throws ConfigurationError unless the pair is
/// admitted and the candidate count is 0, 2 or 6; validator failures become
/// ServiceError.
ViewSet expand_viewpoints(const ViewPair& pair, const std::vector<std::string>& candidates,
                          const std::vector<std::pair<std::string, std::string>>& anchor_qa,
                          ValidatorClient& validator);

/// Candidate count used for a target set size (2 -> 0, 4 -> 2, 8 -> 6).
std::size_t candidates_for(std::size_t target_views);

}  // namespace spatialcot
