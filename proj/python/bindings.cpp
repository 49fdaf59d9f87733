// SPDX-License-Identifier: Apache-2.0
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "spatialcot/corpus_filter.hpp"
#include "spatialcot/dual_channel.hpp"
#include "spatialcot/errors.hpp"
#include "spatialcot/pipeline.hpp"
#include "spatialcot/qa_bank.hpp"
#include "spatialcot/stage_planner.hpp"
#include "spatialcot/view_select.hpp"

namespace py = pybind11;
using namespace spatialcot;

namespace {

using Mat = Matrix<double>;

AttentionParams<double> attention_from(const py::dict& d) {
  AttentionParams<double> p;
  p.wq = d["wq"].cast<Mat>();
  p.wk = d["wk"].cast<Mat>();
  p.wv = d["wv"].cast<Mat>();
  p.wo = d["wo"].cast<Mat>();
  p.bq = d["bq"].cast<RowVector<double>>();
  p.bk = d["bk"].cast<RowVector<double>>();
  p.bv = d["bv"].cast<RowVector<double>>();
  p.bo = d["bo"].cast<RowVector<double>>();
  p.heads = d.contains("heads") ? d["heads"].cast<int>() : 1;
  return p;
}

py::dict attention_to(const AttentionParams<double>& p) {
  py::dict d;
  d["wq"] = p.wq;
  d["wk"] = p.wk;
  d["wv"] = p.wv;
  d["wo"] = p.wo;
  d["bq"] = p.bq;
  d["bk"] = p.bk;
  d["bv"] = p.bv;
  d["bo"] = p.bo;
  d["heads"] = p.heads;
  return d;
}

GrayImage gray_from(const Mat& m) {
  GrayImage g{static_cast<int>(m.cols()), static_cast<int>(m.rows()), {}};
  g.pixels.assign(m.data(), m.data() + m.size());
  return g;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Spatial reasoning corpus synthesis and dual-channel attention";
  m.attr("__version__") = kToolVersion;

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ConfigurationError>(m, "ConfigurationError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<ServiceError>(m, "ServiceError", base.ptr());

  m.def("render_depth", [](double v, bool abbreviated) {
    return render_depth(v, abbreviated ? UnitStyle::abbreviated : UnitStyle::words).text;
  }, py::arg("meters"), py::arg("abbreviated") = false);
  m.def("render_distance", [](double v, bool abbreviated) {
    return render_distance(v, abbreviated ? UnitStyle::abbreviated : UnitStyle::words).text;
  }, py::arg("meters"), py::arg("abbreviated") = false);
  m.def("parse_rendered", [](const std::string& s) { return parse_rendered(s); });

  m.def("proxy_distance", [](const Mat& a, const Mat& b) { return proxy_distance(gray_from(a), gray_from(b)); },
        "Perceptual-distance proxy between two grayscale images in [0, 1].");
  m.def("in_band", [](double score, double lo, double hi) {
    const DistanceBand band{lo, hi};
    band.validate();
    return band.contains(score);
  }, py::arg("score"), py::arg("lo") = 0.35, py::arg("hi") = 0.65);

  m.def("admit", [](const std::vector<double>& scores) { return admit(scores, AdmissionLabelSet::builtin()); },
        "Admission decision for scores aligned with builtin_labels().");
  m.def("builtin_labels", [] {
    std::vector<std::pair<std::string, bool>> out;
    for (const auto& l : AdmissionLabelSet::builtin().labels()) out.emplace_back(l.text, l.positive);
    return out;
  });

  m.def("random_attention", [](int d, int heads, std::uint64_t seed) {
    return attention_to(AttentionParams<double>::random(d, heads, seed));
  }, py::arg("dim"), py::arg("heads") = 1, py::arg("seed") = 0);
  m.def("attn_forward", [](const Mat& x, const py::dict& params) { return attn_forward(x, attention_from(params)); });
  m.def("dual_forward", [](const Mat& x, const py::dict& base, const py::dict& plus, const RowVector<double>& gate) {
    DualChannelParams<double> dc{attention_from(base), attention_from(plus), gate};
    return dual_forward(x, dc);
  }, py::arg("x"), py::arg("base"), py::arg("plus"), py::arg("gate"));
  m.def("grad_check", [](std::size_t instances, std::uint64_t seed, double step, double floor) {
    const auto r = grad_check(instances, seed, step, floor);
    py::dict out;
    out["max_rel_error"] = r.max_rel_error();
    py::dict groups;
    for (const auto& g : r.groups) {
      groups[py::str(g.group)] = py::dict(py::arg("entries") = g.entries, py::arg("max_rel_error") = g.max_rel_error,
                                          py::arg("max_abs_error") = g.max_abs_error);
    }
    out["groups"] = groups;
    return out;
  }, py::arg("instances") = 100, py::arg("seed") = 0, py::arg("step") = 1e-5, py::arg("floor") = 1e-6);

  m.def("param_overhead", [](std::uint64_t layers, std::uint64_t width, double mlp_ratio, std::uint64_t embed,
                             std::uint64_t head) {
    return param_overhead({"custom", layers, width, 1, mlp_ratio, embed, head});
  }, py::arg("layers"), py::arg("width"), py::arg("mlp_ratio") = 4.0, py::arg("embed_params") = 0,
     py::arg("head_params") = 0);
  m.def("reference_overheads", [] {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& c : reference_configs()) out.emplace_back(c.name, param_overhead(c));
    return out;
  });

  m.def("trainable_components", [](int stage) {
    std::vector<std::string> out;
    for (auto c : plan(stage).trainable) out.emplace_back(to_string(c));
    return out;
  });

  m.def("write_synthetic_manifest", [](const std::filesystem::path& dir, std::size_t scenes, std::uint64_t seed,
                                       std::size_t multi_view_every) {
    SyntheticOptions o;
    o.scenes = scenes;
    o.seed = seed;
    o.multi_view_every = multi_view_every;
    return write_synthetic_manifest(dir, o);
  }, py::arg("dir"), py::arg("scenes") = 10, py::arg("seed") = 1, py::arg("multi_view_every") = 0);
  m.def("synthesize", [](const std::filesystem::path& manifest, const std::string& config_json) {
    auto cfg = PipelineConfig::from_json(config_json);
    cfg.apply_env();
    cfg.validate();
    RunResult r;
    {
      py::gil_scoped_release release;
      r = run_synthesis(Manifest::from_file(manifest), cfg);
    }
    return py::make_tuple(r.lines, r.report.to_json());
  }, py::arg("manifest"), py::arg("config_json") = "{}",
     "Returns (records, report_json); each record is one JSON line.");
}
