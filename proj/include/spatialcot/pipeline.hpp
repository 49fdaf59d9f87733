// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spatialcot/corpus_filter.hpp"
#include "spatialcot/geometry.hpp"
#include "spatialcot/qa_bank.hpp"
#include "spatialcot/reasoning.hpp"
#include "spatialcot/view_select.hpp"

namespace spatialcot {

inline constexpr const char* kToolVersion = "0.1.0";

struct ViewEntry {
  std::string id;  // defaults to the image file stem
  std::string image;
  std::string depth;
  std::string mask;
  CameraIntrinsics intrinsics;
};

struct SceneEntry {
  std::string id;
  std::map<ObjectId, std::string> objects;
  std::vector<ViewEntry> views;
  std::optional<std::string> label_scores;  // single-view admission scores
  std::optional<std::string> lpips_scores;  // precomputed pair distances
  std::optional<std::string> point_cloud;   // fused cloud, `x y z object_id` per line
};

/// Relative refs resolve against `root`, the manifest's directory.
struct Manifest {
  std::filesystem::path root;
  std::vector<SceneEntry> scenes;

  static Manifest from_file(const std::filesystem::path& path);
  static Manifest from_json(const std::string& text, std::filesystem::path root);
  std::string to_json() const;

  std::filesystem::path resolve(const std::string& ref) const;
};

struct ClientConfig {
  std::string kind = "stub";  // caption: stub|http; validator: stub|always_true|http
  std::string endpoint;
};

struct ViewMix {
  double two = 0.80;
  double four = 0.15;
  double eight = 0.05;
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  OrderMode order_mode = OrderMode::forward;
  std::size_t single_point_turns = 3;
  std::size_t comparison_turns = 2;
  std::size_t cube_turns = 2;
  std::size_t predicate_turns = 2;
  double eps = kDefaultRelationEps;
  DistanceBand band;
  ViewMix view_mix;
  ClientConfig caption_client;
  ClientConfig validator_client;
  unsigned workers = 1;
  std::optional<std::string> labels;     // label set file
  std::optional<std::string> templates;  // template bank file
  UnitStyle units = UnitStyle::words;

  /// Missing keys keep their defaults; unknown keys are rejected.
  static PipelineConfig from_json(const std::string& text);
  static PipelineConfig from_file(const std::filesystem::path& path);
  std::string to_json() const;

  /// SPATIALCOT_CAPTION_ENDPOINT and SPATIALCOT_VALIDATOR_ENDPOINT override
  /// the endpoints and switch the matching client to http.
  void apply_env();
  void validate() const;
};

struct CorpusRecord {
  Conversation conversation;
  std::size_t view_count = 1;
  std::string tool_version = kToolVersion;
};

/// One JSON line without the trailing newline. Throws EmissionError listing
/// the invariant violations when the conversation is malformed.
std::string emit_record(const Conversation& conv, std::size_t view_count = 1);
std::string emit_record(const CorpusRecord& record);

/// Strict inverse of emit_record. Provenance is not serialized and comes
/// back empty. Throws ConfigurationError on malformed input.
CorpusRecord parse_record(const std::string& line);

struct StageCounts {
  std::size_t input = 0;
  std::size_t admitted = 0;
  std::size_t rejected = 0;
};

struct SkippedScene {
  std::string scene;
  std::string stage;  // ingest | admission | synthesis
  std::string reason;
};

struct RunReport {
  StageCounts ingest;
  StageCounts admission;
  StageCounts synthesis;
  std::map<std::size_t, std::size_t> view_counts;  // set size -> records
  std::size_t validator_failures = 0;
  std::vector<SkippedScene> skipped;

  std::size_t records() const { return synthesis.admitted; }
  std::string to_json() const;
};

struct RunResult {
  std::vector<std::string> lines;  // scene order
  RunReport report;
};

RunResult run_synthesis(const Manifest& manifest, const PipelineConfig& config);

/// Writes the corpus (one record per line) and `<out>.report.json`.
/// Throws IoError when either file cannot be written.
void write_run(const RunResult& result, const std::filesystem::path& out);

std::unique_ptr<CaptionClient> make_caption_client(const ClientConfig& cfg);
/// `images` feeds the proxy validator used by the stub kind.
std::unique_ptr<ValidatorClient> make_validator_client(const ClientConfig& cfg,
                                                       std::map<std::string, GrayImage> images);

PointCloud read_point_cloud(const std::filesystem::path& path);

struct SyntheticOptions {
  std::size_t scenes = 10;
  std::uint64_t seed = 1;
  /// Every n-th scene (1-based) gets a single object; 0 disables.
  std::size_t single_object_every = 0;
  /// Every n-th scene gets label scores topped by a negative label; 0 disables.
  std::size_t reject_every = 0;
  /// Every n-th scene is a ten-frame multi-view trajectory; 0 disables.
  std::size_t multi_view_every = 0;
  int width = 32;
  int height = 24;
};

/// Writes PNG inputs and `manifest.json` under `dir`; returns the manifest path.
std::filesystem::path write_synthetic_manifest(const std::filesystem::path& dir,
                                               const SyntheticOptions& options);

}  // namespace spatialcot
