// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "spatialcot/dual_channel.hpp"
#include "spatialcot/errors.hpp"
#include "spatialcot/pipeline.hpp"
#include "spatialcot/raster_io.hpp"
#include "spatialcot/stage_planner.hpp"
#include "spatialcot/view_select.hpp"

namespace fs = std::filesystem;
using namespace spatialcot;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kEmpty = 2;
constexpr int kIo = 3;
constexpr int kCheckFailed = 4;

std::vector<Frame> load_frames(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Frame> frames;
  for (const auto& f : files) frames.push_back({f.stem().string(), read_gray(f)});
  return frames;
}

std::unique_ptr<PerceptualBackend> make_backend(const std::string& scores) {
  if (scores.empty()) return std::make_unique<ProxyBackend>();
  return std::make_unique<PrecomputedBackend>(PrecomputedBackend::from_file(scores));
}

int run_synth(const std::string& manifest_path, const std::string& config_path, const std::string& out, int workers) {
  auto config = config_path.empty() ? PipelineConfig{} : PipelineConfig::from_file(config_path);
  config.apply_env();
  if (workers > 0) config.workers = static_cast<unsigned>(workers);
  config.validate();
  const auto manifest = Manifest::from_file(manifest_path);
  const auto result = run_synthesis(manifest, config);
  write_run(result, out);
  const auto& r = result.report;
  std::printf("records %zu  ingest %zu/%zu  admission %zu/%zu  synthesis %zu/%zu\n", r.records(),
              r.ingest.admitted, r.ingest.input, r.admission.admitted, r.admission.input, r.synthesis.admitted,
              r.synthesis.input);
  if (r.records() == 0) {
    std::fprintf(stderr, "no scene produced a record; see %s.report.json\n", out.c_str());
    return kEmpty;
  }
  return kOk;
}

int run_pairs(const std::string& frames_dir, const std::string& scores, const DistanceBand& band) {
  const auto frames = load_frames(frames_dir);
  const auto backend = make_backend(scores);
  for (const auto& p : score_pairs(frames, *backend, band)) {
    std::printf("%s\t%s\t%.6f\t%s\n", p.ref_a.c_str(), p.ref_b.c_str(), p.distance,
                p.admitted ? "admitted" : "rejected");
  }
  return kOk;
}

int run_expand(const std::string& frames_dir, const std::string& scores, const std::string& a, const std::string& b,
               std::size_t views, const std::string& qa_path, ClientConfig validator, const DistanceBand& band) {
  const auto frames = load_frames(frames_dir);
  auto pos = [&](const std::string& id) {
    for (std::size_t i = 0; i < frames.size(); ++i) {
      if (frames[i].id == id) return i;
    }
    throw NotFoundError("no frame named " + id);
  };
  std::size_t ia = pos(a);
  std::size_t ib = pos(b);
  if (ia > ib) std::swap(ia, ib);
  const auto backend = make_backend(scores);
  const double d = backend->distance(frames[ia], frames[ib]);
  const ViewPair pair{frames[ia].id, frames[ib].id, d, band.contains(d)};
  if (!pair.admitted) {
    std::printf("pair %s/%s distance %.6f is outside the band; not expanded\n", pair.ref_a.c_str(),
                pair.ref_b.c_str(), d);
    return kOk;
  }
  const std::size_t count = candidates_for(views);
  const std::size_t available = ib - ia - 1;
  if (available < count) {
    throw ConfigurationError("only " + std::to_string(available) + " frames lie between the anchors, need " +
                             std::to_string(count));
  }
  std::vector<std::string> candidates;
  for (std::size_t k = 0; k < count; ++k) candidates.push_back(frames[ia + 1 + k * available / count].id);

  std::vector<std::pair<std::string, std::string>> qa;
  if (!qa_path.empty()) {
    std::ifstream in(qa_path);
    if (!in) throw IoError("cannot open " + qa_path);
    std::string line;
    while (std::getline(in, line)) {
      const auto tab = line.find('\t');
      if (line.empty() || tab == std::string::npos) continue;
      qa.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    }
  } else {
    qa.emplace_back("Is the scene the same as in the anchor views?", "Yes.");
  }
  std::map<std::string, GrayImage> images;
  for (const auto& f : frames) images[f.id] = f.image;
  auto client = make_validator_client(validator, std::move(images));
  const auto set = expand_viewpoints(pair, candidates, qa, *client);
  for (const auto& [id, vote] : set.validation_votes) std::printf("vote\t%s\t%s\n", id.c_str(), vote ? "valid" : "invalid");
  std::printf("set\t%zu", set.size());
  for (const auto& f : set.frames) std::printf("\t%s", f.c_str());
  std::printf("\n");
  return kOk;
}

int run_grad_check(std::size_t instances, std::uint64_t seed, double step, double floor, double tolerance) {
  const auto report = grad_check(instances, seed, step, floor);
  std::printf("grad-check: %zu instances, central differences, step %g, magnitude floor %g\n", report.instances,
              report.step, report.floor);
  for (const auto& g : report.groups) {
    std::printf("  %-8s entries %6zu  max rel error %.3e  max abs error %.3e\n", g.group.c_str(), g.entries,
                g.max_rel_error, g.max_abs_error);
  }
  const bool ok = report.max_rel_error() <= tolerance;
  std::printf("overall max rel error %.3e (tolerance %.1e): %s\n", report.max_rel_error(), tolerance,
              ok ? "PASS" : "FAIL");
  return ok ? kOk : kCheckFailed;
}

int run_param_audit(const std::vector<VitConfig>& configs, double lo, double hi) {
  bool ok = true;
  std::printf("%-22s %6s %6s %6s %8s %16s %16s %9s\n", "config", "layers", "width", "heads", "mlp", "added", "base",
              "overhead");
  for (const auto& c : configs) {
    const auto count = param_count(c);
    const double f = count.fraction();
    const bool inside = lo <= f && f <= hi;
    ok = ok && inside;
    std::printf("%-22s %6llu %6llu %6llu %8.4f %16llu %16llu %8.2f%% %s\n", c.name.c_str(),
                static_cast<unsigned long long>(c.layers), static_cast<unsigned long long>(c.width),
                static_cast<unsigned long long>(c.heads), c.mlp_ratio, static_cast<unsigned long long>(count.added),
                static_cast<unsigned long long>(count.base), 100.0 * f, inside ? "in band" : "OUT OF BAND");
  }
  std::printf("band [%.2f, %.2f]: %s\n", lo, hi, ok ? "all inside" : "some outside");
  return ok ? kOk : kCheckFailed;
}

int run_plan_stages() {
  std::printf("%-6s", "stage");
  for (Component c : kAllComponents) std::printf(" %-20s", std::string(to_string(c)).c_str());
  std::printf("\n");
  for (int stage = 1; stage <= 3; ++stage) {
    const auto p = plan(stage);
    std::printf("%-6d", stage);
    for (Component c : kAllComponents) std::printf(" %-20s", p.is_trainable(c) ? "trainable" : "frozen");
    std::printf("\n");
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial reasoning corpus synthesis and dual-channel attention checks"};
  app.require_subcommand(1);

  std::string manifest;
  std::string config;
  std::string out = "corpus.jsonl";
  int workers = 0;
  auto* synth = app.add_subcommand("synth", "Synthesize a conversation corpus from a manifest");
  synth->add_option("--manifest", manifest, "Manifest JSON")->required();
  synth->add_option("--config", config, "Pipeline config JSON");
  synth->add_option("--out", out, "Corpus output path; the report goes to <out>.report.json");
  synth->add_option("--workers", workers, "Override the configured worker count");

  std::string frames_dir;
  std::string scores;
  DistanceBand band;
  auto* pairs = app.add_subcommand("pairs", "Score all frame pairs in a directory of PNGs");
  pairs->add_option("--frames", frames_dir, "Directory of frame PNGs")->required();
  pairs->add_option("--scores", scores, "Precomputed 'frame_a frame_b score' file; proxy metric when omitted");
  pairs->add_option("--lo", band.lo, "Band lower edge");
  pairs->add_option("--hi", band.hi, "Band upper edge");

  std::string anchor_a;
  std::string anchor_b;
  std::size_t views = 4;
  std::string qa_path;
  ClientConfig validator;
  auto* expand = app.add_subcommand("expand", "Expand an anchor pair to a 4- or 8-view set");
  expand->add_option("--frames", frames_dir, "Directory of frame PNGs in trajectory order")->required();
  expand->add_option("--scores", scores, "Precomputed pair distances");
  expand->add_option("--a", anchor_a, "First anchor frame id")->required();
  expand->add_option("--b", anchor_b, "Second anchor frame id")->required();
  expand->add_option("--views", views, "Target set size")->check(CLI::IsMember({2, 4, 8}));
  expand->add_option("--qa", qa_path, "Tab-separated question/answer pairs to validate");
  expand->add_option("--validator", validator.kind, "stub, always_true or http");
  expand->add_option("--endpoint", validator.endpoint, "Validator endpoint for http");
  expand->add_option("--lo", band.lo, "Band lower edge");
  expand->add_option("--hi", band.hi, "Band upper edge");

  std::size_t instances = 100;
  std::uint64_t seed = 1;
  double step = 1e-5;
  double tolerance = 1e-4;
  double floor = 1e-6;
  auto* gc = app.add_subcommand("grad-check", "Compare analytic and finite-difference gradients");
  gc->add_option("--instances", instances, "Random instances");
  gc->add_option("--seed", seed, "Seed");
  gc->add_option("--step", step, "Finite-difference step");
  gc->add_option("--tolerance", tolerance, "Maximum accepted relative error");
  gc->add_option("--floor", floor, "Gradient magnitude below which errors are measured against the floor");

  VitConfig custom{"custom"};
  double band_lo = 0.20;
  double band_hi = 0.35;
  auto* audit = app.add_subcommand("param-audit", "Parameter overhead of the dual-channel adapter");
  audit->add_option("--layers", custom.layers, "Custom config: layers");
  audit->add_option("--width", custom.width, "Custom config: width");
  audit->add_option("--heads", custom.heads, "Custom config: heads");
  audit->add_option("--mlp-ratio", custom.mlp_ratio, "Custom config: MLP ratio");
  audit->add_option("--embed-params", custom.patch_embed_params, "Custom config: embedding parameters");
  audit->add_option("--head-params", custom.head_params, "Custom config: head parameters");
  audit->add_option("--lo", band_lo, "Band lower edge");
  audit->add_option("--hi", band_hi, "Band upper edge");

  auto* stages = app.add_subcommand("plan-stages", "Print the trainable components per training stage");

  SyntheticOptions demo;
  std::string demo_dir = "demo";
  auto* demo_cmd = app.add_subcommand("demo-manifest", "Write a synthetic manifest for trying the pipeline");
  demo_cmd->add_option("--out", demo_dir, "Output directory");
  demo_cmd->add_option("--scenes", demo.scenes, "Scene count");
  demo_cmd->add_option("--seed", demo.seed, "Seed");
  demo_cmd->add_option("--multi-view-every", demo.multi_view_every, "Every n-th scene is a ten-frame trajectory");
  demo_cmd->add_option("--single-object-every", demo.single_object_every, "Every n-th scene has one object");
  demo_cmd->add_option("--reject-every", demo.reject_every, "Every n-th scene fails the label filter");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*synth) return run_synth(manifest, config, out, workers);
    if (*pairs) return run_pairs(frames_dir, scores, band);
    if (*expand) return run_expand(frames_dir, scores, anchor_a, anchor_b, views, qa_path, validator, band);
    if (*gc) return run_grad_check(instances, seed, step, floor, tolerance);
    if (*audit) {
      if (audit->count("--width") > 0) return run_param_audit({custom}, band_lo, band_hi);
      return run_param_audit(reference_configs(), band_lo, band_hi);
    }
    if (*stages) return run_plan_stages();
    if (*demo_cmd) {
      std::printf("%s\n", write_synthetic_manifest(demo_dir, demo).string().c_str());
      return kOk;
    }
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  }
  return kUsage;
}
