// SPDX-License-Identifier: Apache-2.0
#include "spatialcot/view_select.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "spatialcot/errors.hpp"

namespace spatialcot {

void DistanceBand::validate() const {
  if (!(0.0 <= lo && lo <= hi && hi <= 1.0)) {
    throw ConfigurationError("distance band must satisfy 0 <= lo <= hi <= 1");
  }
}

namespace {

constexpr int kBlock = 8;

std::vector<double> block_means(const GrayImage& img) {
  const int bw = (img.width + kBlock - 1) / kBlock;
  const int bh = (img.height + kBlock - 1) / kBlock;
  std::vector<double> sums(static_cast<std::size_t>(bw) * bh, 0.0);
  std::vector<int> counts(sums.size(), 0);
  for (int v = 0; v < img.height; ++v) {
    for (int u = 0; u < img.width; ++u) {
      const auto cell = static_cast<std::size_t>(v / kBlock) * bw + u / kBlock;
      sums[cell] += img.at(u, v);
      ++counts[cell];
    }
  }
  for (std::size_t i = 0; i < sums.size(); ++i) sums[i] /= counts[i];
  return sums;
}

}  // namespace

double proxy_distance(const GrayImage& a, const GrayImage& b) {
  if (a.width != b.width || a.height != b.height || a.width <= 0 || a.height <= 0 ||
      a.pixels.size() != b.pixels.size()) {
    throw ConfigurationError("proxy_distance: images differ in size or are empty");
  }
  const auto pa = block_means(a);
  const auto pb = block_means(b);
  const double n = static_cast<double>(pa.size());
  double ma = 0.0;
  double mb = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    ma += pa[i];
    mb += pb[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0;
  double va = 0.0;
  double vb = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double da = pa[i] - ma;
    const double db = pb[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  // Correlation is undefined for a flat image: identical pooled content
  // counts as distance 0, anything else as 1.
  if (va == 0.0 || vb == 0.0) return pa == pb ? 0.0 : 1.0;
  const double r = cov / std::sqrt(va * vb);
  return std::clamp(1.0 - std::max(0.0, r), 0.0, 1.0);
}

PrecomputedBackend PrecomputedBackend::from_string(const std::string& content) {
  PrecomputedBackend backend;
  std::istringstream in(content);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.front() == '#') continue;
    std::istringstream fields(line);
    std::string a;
    std::string b;
    double score = 0.0;
    if (!(fields >> a)) continue;
    if (!(fields >> b >> score)) {
      throw ConfigurationError("score file line " + std::to_string(lineno) +
                               ": expected 'frame_a frame_b score'");
    }
    if (!(score >= 0.0 && score <= 1.0)) {
      throw ConfigurationError("score file line " + std::to_string(lineno) + ": score outside [0, 1]");
    }
    backend.set(a, b, score);
  }
  return backend;
}

PrecomputedBackend PrecomputedBackend::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open score file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_string(ss.str());
}

void PrecomputedBackend::set(const std::string& a, const std::string& b, double score) {
  scores_[a < b ? std::pair{a, b} : std::pair{b, a}] = score;
}

double PrecomputedBackend::distance(const Frame& a, const Frame& b) const {
  if (a.id == b.id) return 0.0;
  auto key = a.id < b.id ? std::pair{a.id, b.id} : std::pair{b.id, a.id};
  auto it = scores_.find(key);
  if (it == scores_.end()) {
    throw ServiceError(a.id + "/" + b.id, "no precomputed score", false);
  }
  return it->second;
}

std::vector<ViewPair> score_pairs(const std::vector<Frame>& frames, const PerceptualBackend& backend,
                                  const DistanceBand& band) {
  band.validate();
  if (frames.size() < 2) throw ConfigurationError("score_pairs: need at least two frames");
  std::vector<ViewPair> pairs;
  pairs.reserve(frames.size() * (frames.size() - 1) / 2);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    for (std::size_t j = i + 1; j < frames.size(); ++j) {
      const std::string subject = frames[i].id + "/" + frames[j].id;
      double d = 0.0;
      try {
        d = backend.distance(frames[i], frames[j]);
      } catch (const ServiceError& e) {
        throw ServiceError(subject, e.what(), e.retryable());
      } catch (const std::exception& e) {
        throw ServiceError(subject, std::string(backend.name()) + " failed: " + e.what());
      }
      if (!std::isfinite(d) || d < 0.0 || d > 1.0) {
        throw ServiceError(subject, backend.name() + " returned a distance outside [0, 1]", false);
      }
      pairs.push_back({frames[i].id, frames[j].id, d, band.contains(d)});
    }
  }
  return pairs;
}

bool ProxyValidator::validate(const ValidationRequest& request) {
  if (request.frame_ids.size() != 3) {
    throw ConfigurationError("proxy validator expects two anchors and one candidate");
  }
  auto image = [&](const std::string& id) -> const GrayImage& {
    auto it = images_.find(id);
    if (it == images_.end()) throw NotFoundError("proxy validator: no image for frame " + id);
    return it->second;
  };
  const auto& cand = image(request.frame_ids[2]);
  return proxy_distance(cand, image(request.frame_ids[0])) < limit_ &&
         proxy_distance(cand, image(request.frame_ids[1])) < limit_;
}

std::size_t candidates_for(std::size_t target_views) {
  switch (target_views) {
    case 2: return 0;
    case 4: return 2;
    case 8: return 6;
    default: throw ConfigurationError("view sets have 2, 4 or 8 frames");
  }
}

ViewSet expand_viewpoints(const ViewPair& pair, const std::vector<std::string>& candidates,
                          const std::vector<std::pair<std::string, std::string>>& anchor_qa,
                          ValidatorClient& validator) {
  if (!pair.admitted) throw ConfigurationError("expand_viewpoints: anchor pair is not admitted");
  const std::size_t n = candidates.size();
  if (n != 0 && n != 2 && n != 6) {
    throw ConfigurationError("expand_viewpoints: candidate count must be 0, 2 or 6");
  }
  ViewSet set;
  set.anchor_pair = pair;
  std::size_t valid = 0;
  for (const auto& cand : candidates) {
    bool ok = true;
    for (const auto& [q, a] : anchor_qa) {
      ValidationRequest req{q, a, {pair.ref_a, pair.ref_b, cand}};
      bool vote = false;
      try {
        vote = validator.validate(req);
      } catch (const ServiceError&) {
        throw;
      } catch (const std::exception& e) {
        throw ServiceError(pair.ref_a + "/" + pair.ref_b, std::string("validator failed: ") + e.what());
      }
      if (!vote) {
        ok = false;
        break;
      }
    }
    set.validation_votes[cand] = ok;
    if (ok) ++valid;
  }
  set.frames.push_back(pair.ref_a);
  if (valid * 2 > n) set.frames.insert(set.frames.end(), candidates.begin(), candidates.end());
  set.frames.push_back(pair.ref_b);
  return set;
}

}  // namespace spatialcot
