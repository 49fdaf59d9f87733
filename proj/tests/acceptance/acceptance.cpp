// SPDX-License-Identifier: Apache-2.0
// One PASS/FAIL line per acceptance criterion. Exit status is non-zero if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "spatialcot/dual_channel.hpp"
#include "spatialcot/errors.hpp"
#include "spatialcot/geometry.hpp"
#include "spatialcot/pipeline.hpp"
#include "spatialcot/reasoning.hpp"
#include "spatialcot/rng.hpp"
#include "spatialcot/stage_planner.hpp"
#include "spatialcot/view_select.hpp"

using namespace spatialcot;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Vec3 random_vec(Rng& rng, double scale) {
  return {scale * (2 * rng.uniform() - 1), scale * (2 * rng.uniform() - 1), scale * (2 * rng.uniform() - 1)};
}

Matrix<double> random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Matrix<double> m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = 2 * rng.uniform() - 1;
  return m;
}

Outcome init_identity() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    Rng rng(derive_seed(101, i));
    const int heads = 1 << rng.index(3);
    const Eigen::Index d = heads * (1 + static_cast<Eigen::Index>(rng.index(16 / heads)));
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.index(8));
    const auto base = AttentionParams<double>::random(d, heads, rng.next());
    const auto x = random_matrix(rng, n, d);
    const auto dc = init_plus_from_base(base);
    worst = std::max(worst, (dual_forward(x, dc) - attn_forward(x, base)).cwiseAbs().maxCoeff());
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-12 && secs < 5.0, fmt("max |diff| %.3g", worst) + fmt(", %.2f s", secs)};
}

Outcome gradient_fidelity() {
  const auto t0 = Clock::now();
  const auto report = grad_check(100, 202);
  double worst_abs = 0.0;
  for (const auto& g : report.groups) worst_abs = std::max(worst_abs, g.max_abs_error);
  const double secs = seconds_since(t0);
  return {report.max_rel_error() <= 1e-4 && secs < 60.0,
          fmt("max rel %.3g", report.max_rel_error()) + fmt(" (floor %.0e)", report.floor) +
              fmt(", max abs %.3g", worst_abs) + fmt(", %.2f s", secs)};
}

Outcome overhead_audit() {
  bool ok = true;
  std::string detail;
  for (const auto& cfg : reference_configs()) {
    const double f = param_overhead(cfg);
    const bool in = f >= 0.20 && f <= 0.35;
    ok = ok && in;
    detail += cfg.name + fmt(" %.4f", f) + (in ? "" : " OUT") + "; ";
  }
  // Term-by-term count for L=1, d=4, hidden 16, no embedding or head.
  const std::uint64_t d = 4, hidden = 16;
  const std::uint64_t qkvo = 4 * d * d, qkvo_bias = 4 * d, gate = d;
  const std::uint64_t fc1 = d * hidden + hidden, fc2 = hidden * d + d, ln = 2 * 2 * d;
  const auto tiny = param_count({"tiny", 1, d, 1, 4.0, 0, 0});
  const bool tiny_ok = tiny.added == qkvo + qkvo_bias + gate && tiny.base == qkvo + qkvo_bias + fc1 + fc2 + ln;
  detail += "tiny " + std::to_string(tiny.added) + "/" + std::to_string(tiny.base) + (tiny_ok ? " exact" : " MISMATCH");
  return {ok && tiny_ok, detail};
}

SynthScene random_scene(Rng& rng, std::size_t index) {
  const int w = 24, h = 16;
  const int objects = 2 + static_cast<int>(rng.index(3));
  DepthMap d(w, h);
  SegmentationMask m(w, h);
  const int strip = w / objects;
  for (int o = 0; o < objects; ++o) {
    const double base = 0.3 + 4.0 * rng.uniform();
    for (int v = 0; v < h; ++v) {
      for (int u = o * strip; u < (o + 1) * strip; ++u) {
        if (rng.uniform() < 0.1) continue;
        d.set(u, v, base + 0.2 * rng.uniform());
        m.set(u, v, static_cast<ObjectId>(o + 1));
      }
    }
    m.descriptions[static_cast<ObjectId>(o + 1)] = "object " + std::to_string(o + 1);
  }
  return SynthScene::from_view("scene" + std::to_string(index), std::move(d), std::move(m), {30, 30, 12, 8, w, h});
}

Outcome conversation_structure() {
  Rng rng(303);
  StubCaptionClient captions;
  std::size_t bad = 0;
  std::size_t forward_bad = 0;
  const std::vector<Level> forward_seq = {Level::pixel,  Level::pixel,  Level::pixel,  Level::pixel,
                                          Level::pixel,  Level::object, Level::object, Level::object,
                                          Level::object, Level::scene,  Level::caption, Level::caption};
  const OrderMode modes[] = {OrderMode::forward, OrderMode::reverse, OrderMode::random};
  for (std::size_t i = 0; i < 10000; ++i) {
    if (i % 100 == 0) rng = Rng(derive_seed(303, i));
    const auto scene = random_scene(rng, i);
    const OrderMode mode = modes[i % 3];
    const auto conv = synthesize(scene, "c" + std::to_string(i), {"img.png"}, mode, derive_seed(7, i), captions);
    bool ok = conversation_problems(conv).empty() && conv.turns.size() == 12 &&
              conv.turns[10].level == Level::caption && conv.turns[11].level == Level::caption;
    const auto j = nlohmann::json::parse(emit_record(conv));
    const auto& msgs = j.at("conversations");
    ok = ok && msgs.size() == 24;
    for (std::size_t k = 0; ok && k < msgs.size(); ++k) {
      ok = msgs[k].at("from") == (k % 2 == 0 ? "human" : "gpt") && !msgs[k].at("value").get<std::string>().empty();
    }
    if (!ok) ++bad;
    if (mode == OrderMode::forward) {
      std::vector<Level> seq;
      for (const auto& t : conv.turns) seq.push_back(t.level);
      if (seq != forward_seq) ++forward_bad;
    }
  }
  return {bad == 0 && forward_bad == 0,
          "10000 conversations, " + std::to_string(bad) + " malformed, " + std::to_string(forward_bad) +
              " forward-order mismatches"};
}

Outcome rendering_rules() {
  Rng rng(404);
  std::size_t wrong_unit = 0, wrong_value = 0, too_far = 0, ties = 0;
  for (int i = 0; i < 100000; ++i) {
    double x;
    switch (i % 4) {
      case 0: x = 0.5 + (rng.uniform() - 0.5) * 1e-3; break;       // around the unit switch
      case 1: x = std::round(rng.uniform() * 20000) / 4000 + 1e-4 * std::round(rng.uniform() * 10) / 2; break;
      default: x = std::pow(10.0, -3.0 + 5.0 * rng.uniform()); break;
    }
    if (!(x > 0)) continue;
    const auto r = render_depth(x);
    const bool cm = r.text.size() > 12 && r.text.compare(r.text.size() - 12, 12, " centimeters") == 0;
    if (cm != (x < 0.5)) ++wrong_unit;
    const double back = parse_rendered(r.text);
    // One decimal of centimeters and three of meters are both a millimeter.
    if (std::fabs(back - x) > 0.0005 + 1e-12) ++too_far;
    // Half-up oracle in long double; values within 1e-9 of a tie are ambiguous in binary and skipped.
    const long double scaled = static_cast<long double>(x) * 1000.0L;
    const long double frac = scaled - std::floor(scaled);
    if (std::fabs(static_cast<double>(frac - 0.5L)) < 1e-9) {
      ++ties;
      continue;
    }
    const long double expect = std::floor(scaled + 0.5L) / 1000.0L;
    if (std::fabs(static_cast<double>(expect) - back) > 1e-12) ++wrong_value;
  }
  return {wrong_unit == 0 && wrong_value == 0 && too_far == 0,
          "1e5 values: " + std::to_string(wrong_unit) + " unit errors, " + std::to_string(wrong_value) +
              " rounding errors, " + std::to_string(too_far) + " beyond half a unit (" + std::to_string(ties) +
              " exact-tie inputs checked by bound only)"};
}

class VoteTable : public ValidatorClient {
 public:
  explicit VoteTable(unsigned bits) : bits_(bits) {}
  bool validate(const ValidationRequest& r) override {
    const auto& id = r.frame_ids.at(2);
    return (bits_ >> std::stoi(id.substr(1))) & 1u;
  }

 private:
  unsigned bits_;
};

Outcome view_band() {
  Rng rng(505);
  const DistanceBand band;
  std::size_t wrong = 0;
  std::vector<double> scores = {0.0, 0.35, 0.65, 1.0, std::nextafter(0.35, 0.0), std::nextafter(0.65, 1.0)};
  for (int i = 0; i < 100000; ++i) scores.push_back(rng.uniform());
  for (int i = 0; i <= 100; ++i) scores.push_back(i / 100.0);
  PrecomputedBackend backend;
  for (double s : scores) {
    backend.set("a", "b", s);
    const auto pair = score_pairs({{"a", {}}, {"b", {}}}, backend, band).at(0);
    if (pair.admitted != (s >= 0.35 && s <= 0.65)) ++wrong;
  }
  std::size_t wrong_expand = 0;
  for (std::size_t n : {0u, 2u, 6u}) {
    for (unsigned bits = 0; bits < (1u << n); ++bits) {
      std::vector<std::string> cands;
      for (std::size_t k = 0; k < n; ++k) cands.push_back("c" + std::to_string(k));
      VoteTable votes(bits);
      const auto set = expand_viewpoints({"a", "b", 0.5, true}, cands, {{"q", "a"}}, votes);
      const std::size_t valid = static_cast<std::size_t>(__builtin_popcount(bits));
      const bool accept = valid * 2 > n;
      if (set.size() != (accept ? n + 2 : 2)) ++wrong_expand;
    }
  }
  VoteTable two_of_two(0b11), one_of_two(0b01);
  const bool examples = expand_viewpoints({"a", "b", 0.5, true}, {"c0", "c1"}, {{"q", "a"}}, two_of_two).size() == 4 &&
                        expand_viewpoints({"a", "b", 0.5, true}, {"c0", "c1"}, {{"q", "a"}}, one_of_two).size() == 2;
  return {wrong == 0 && wrong_expand == 0 && examples,
          std::to_string(scores.size()) + " scores, " + std::to_string(wrong) + " band errors, " +
              std::to_string(wrong_expand) + " expansion errors over all vote patterns"};
}

Outcome geometry_oracles() {
  Rng rng(606);
  double worst_depth = 0.0;
  std::size_t cube_bad = 0;
  for (int s = 0; s < 100; ++s) {
    const int w = 8 + static_cast<int>(rng.index(40)), h = 8 + static_cast<int>(rng.index(40));
    DepthMap d(w, h);
    SegmentationMask m(w, h);
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        if (rng.uniform() < 0.15) continue;
        d.set(u, v, 0.1 + 20 * rng.uniform());
        const auto id = static_cast<ObjectId>(rng.index(4));
        m.set(u, v, id);
        if (id) m.descriptions[id] = "o";
      }
    }
    const CameraIntrinsics k{10 + 200 * rng.uniform(), 10 + 200 * rng.uniform(), w * rng.uniform(), h * rng.uniform(), w, h};
    const auto cloud = backproject(d, m, k);
    const auto back = reproject(cloud, k);
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        if (d.is_valid(u, v) != back.is_valid(u, v)) {
          worst_depth = INFINITY;
        } else if (d.is_valid(u, v)) {
          worst_depth = std::max(worst_depth, std::fabs(d.at(u, v) - back.at(u, v)));
        }
      }
    }
    for (const auto& c : bounding_cubes(cloud)) {
      Vec3 lo{INFINITY, INFINITY, INFINITY}, hi{-INFINITY, -INFINITY, -INFINITY};
      for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (cloud.object_ids[i] != c.object_id) continue;
        const auto& p = cloud.points[i];
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
      }
      if (!(c.min_corner == lo) || !(c.max_corner == hi)) ++cube_bad;
    }
  }
  std::size_t pred_bad = 0;
  const double eps = kDefaultRelationEps;
  for (int i = 0; i < 10000; ++i) {
    const Vec3 ca = random_vec(rng, 2), half_a = random_vec(rng, 0.3);
    const Vec3 cb = rng.uniform() < 0.2 ? ca + random_vec(rng, 0.03) : random_vec(rng, 2);
    const Vec3 half_b = random_vec(rng, 0.3);
    auto cube = [](ObjectId id, Vec3 c, Vec3 h) {
      const Vec3 a{std::fabs(h.x), std::fabs(h.y), std::fabs(h.z)};
      return BoundingCube{id, c - a, c + a};
    };
    const auto a = cube(1, ca, half_a), b = cube(2, cb, half_b);
    const auto r = spatial_relation(a, b, eps);
    const Vec3 da = a.center() - b.center();
    const bool ok = r.left_of == (da.x < -eps) && r.right_of == (da.x > eps) && r.below == (da.y < -eps) &&
                    r.above == (da.y > eps) && r.in_front_of == (da.z < -eps) && r.behind == (da.z > eps);
    if (!ok) ++pred_bad;
  }
  std::size_t metric_bad = 0;
  for (int i = 0; i < 10000; ++i) {
    BoundingCube c[3];
    for (auto& x : c) {
      const Vec3 p = random_vec(rng, 5);
      x = {1, p, p + Vec3{0.1, 0.2, 0.3}};
    }
    const double ab = spatial_relation(c[0], c[1]).center_distance;
    const double ba = spatial_relation(c[1], c[0]).center_distance;
    const double bc = spatial_relation(c[1], c[2]).center_distance;
    const double ac = spatial_relation(c[0], c[2]).center_distance;
    if (ab != ba || ac > ab + bc + 1e-12) ++metric_bad;
  }
  return {worst_depth <= 1e-6 && cube_bad == 0 && pred_bad == 0 && metric_bad == 0,
          fmt("round-trip max error %.3g m", worst_depth) + ", " + std::to_string(cube_bad) + " cube, " +
              std::to_string(pred_bad) + " predicate, " + std::to_string(metric_bad) + " metric failures"};
}

Outcome freeze_plans() {
  using C = Component;
  bool ok = plan(1).trainable == std::set<C>{C::projector} &&
            plan(2).trainable == std::set<C>{C::projector, C::llm} &&
            plan(3).trainable == std::set<C>{C::projector, C::dual_channel_plus};
  std::size_t cases = 0, bad = 0;
  for (int stage = 1; stage <= 3; ++stage) {
    for (unsigned mask = 0; mask < 16; ++mask) {
      std::set<C> touched;
      std::vector<C> expect;
      for (unsigned b = 0; b < 4; ++b) {
        if (!(mask >> b & 1u)) continue;
        touched.insert(kAllComponents[b]);
        if (!plan(stage).trainable.count(kAllComponents[b])) expect.push_back(kAllComponents[b]);
      }
      ++cases;
      if (validate_updates(plan(stage), touched) != expect) ++bad;
    }
  }
  return {ok && bad == 0, std::to_string(cases) + " stage x component cases, " + std::to_string(bad) + " wrong"};
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

Outcome determinism(const std::string& cli) {
  const fs::path dir = fs::temp_directory_path() / ("spatialcot_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto manifest = write_synthetic_manifest(
      dir / "data", {.scenes = 1000, .seed = 9, .single_object_every = 50, .reject_every = 25, .multi_view_every = 10});
  {
    std::ofstream cfg(dir / "config.json");
    cfg << R"({"seed": 2024, "order_mode": "random"})";
  }
  double worst = 0.0;
  std::string outputs[2];
  std::string reports[2];
  const unsigned workers[2] = {1, 8};
  for (int i = 0; i < 2; ++i) {
    const auto out = dir / ("corpus_w" + std::to_string(workers[i]) + ".jsonl");
    const std::string cmd = "\"" + cli + "\" synth --manifest \"" + manifest.string() + "\" --config \"" +
                            (dir / "config.json").string() + "\" --out \"" + out.string() + "\" --workers " +
                            std::to_string(workers[i]) + " > /dev/null";
    const auto t0 = Clock::now();
    const int rc = std::system(cmd.c_str());
    worst = std::max(worst, seconds_since(t0));
    if (rc != 0) return {false, "synth exited with status " + std::to_string(rc)};
    outputs[i] = read_file(out);
    reports[i] = read_file(out.string() + ".report.json");
  }
  const std::size_t lines = static_cast<std::size_t>(std::count(outputs[0].begin(), outputs[0].end(), '\n'));
  fs::remove_all(dir);
  const bool same = outputs[0] == outputs[1] && reports[0] == reports[1] && fnv1a(outputs[0]) == fnv1a(outputs[1]);
  char digest[32];
  std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(fnv1a(outputs[0])));
  return {same && lines > 0 && worst < 30.0,
          std::to_string(lines) + " records, digest " + digest + (same ? " identical" : " DIFFER") +
              " for workers 1/8" + fmt(", slowest run %.2f s", worst)};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <path-to-spatialcot-cli>\n", argv[0]);
    return 1;
  }
  const std::string cli = argv[1];
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"init-identity", init_identity},
      {"gradient-fidelity", gradient_fidelity},
      {"parameter-overhead", overhead_audit},
      {"conversation-structure", conversation_structure},
      {"rendering-rules", rendering_rules},
      {"view-band", view_band},
      {"geometry-oracles", geometry_oracles},
      {"freeze-plans", freeze_plans},
      {"determinism", [&] { return determinism(cli); }},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %-24s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, std::size(criteria));
  return failures == 0 ? 0 : 1;
}
