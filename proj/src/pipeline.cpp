// SPDX-License-Identifier: Apache-2.0
#include "spatialcot/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "spatialcot/errors.hpp"
#include "spatialcot/raster_io.hpp"
#include "spatialcot/rng.hpp"

namespace spatialcot {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw ConfigurationError(where + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  auto it = obj.find(key);
  return it == obj.end() ? fallback : it->get<T>();
}

}  // namespace

// ---------------------------------------------------------------- manifest

std::filesystem::path Manifest::resolve(const std::string& ref) const {
  std::filesystem::path p(ref);
  return p.is_absolute() ? p : root / p;
}

Manifest Manifest::from_file(const std::filesystem::path& path) {
  return from_json(slurp(path), path.parent_path());
}

Manifest Manifest::from_json(const std::string& text, std::filesystem::path root) {
  Manifest m;
  m.root = std::move(root);
  try {
    const json doc = json::parse(text);
    reject_unknown_keys(doc, {"scenes"}, "manifest");
    std::set<std::string> scene_ids;
    for (const auto& js : doc.at("scenes")) {
      reject_unknown_keys(js, {"id", "objects", "views", "label_scores", "lpips_scores", "point_cloud"},
                          "manifest scene");
      SceneEntry s;
      s.id = js.at("id").get<std::string>();
      if (s.id.empty() || !scene_ids.insert(s.id).second) {
        throw ConfigurationError("manifest: scene id '" + s.id + "' is empty or repeated");
      }
      for (const auto& [key, value] : js.at("objects").items()) {
        unsigned long id = 0;
        try {
          std::size_t used = 0;
          id = std::stoul(key, &used);
          if (used != key.size()) throw std::invalid_argument(key);
        } catch (const std::exception&) {
          throw ConfigurationError("manifest scene " + s.id + ": object key '" + key + "' is not an id");
        }
        if (id == 0 || id > 255) {
          throw ConfigurationError("manifest scene " + s.id + ": object ids must lie in 1..255");
        }
        s.objects[static_cast<ObjectId>(id)] = value.get<std::string>();
      }
      std::set<std::string> view_ids;
      for (const auto& jv : js.at("views")) {
        reject_unknown_keys(jv, {"id", "image", "depth", "mask", "intrinsics"}, "manifest view");
        ViewEntry v;
        v.image = jv.at("image").get<std::string>();
        v.depth = jv.at("depth").get<std::string>();
        v.mask = jv.at("mask").get<std::string>();
        v.id = get_or<std::string>(jv, "id", std::filesystem::path(v.image).stem().string());
        const auto& ji = jv.at("intrinsics");
        reject_unknown_keys(ji, {"fx", "fy", "cx", "cy", "width", "height"}, "manifest intrinsics");
        v.intrinsics = {ji.at("fx").get<double>(), ji.at("fy").get<double>(), ji.at("cx").get<double>(),
                        ji.at("cy").get<double>(), ji.at("width").get<int>(), ji.at("height").get<int>()};
        v.intrinsics.validate();
        if (!view_ids.insert(v.id).second) {
          throw ConfigurationError("manifest scene " + s.id + ": repeated view id '" + v.id + "'");
        }
        s.views.push_back(std::move(v));
      }
      if (s.views.empty()) throw ConfigurationError("manifest scene " + s.id + " has no views");
      if (js.contains("label_scores")) s.label_scores = js["label_scores"].get<std::string>();
      if (js.contains("lpips_scores")) s.lpips_scores = js["lpips_scores"].get<std::string>();
      if (js.contains("point_cloud")) s.point_cloud = js["point_cloud"].get<std::string>();
      m.scenes.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw ConfigurationError(std::string("manifest: ") + e.what());
  }
  return m;
}

std::string Manifest::to_json() const {
  ordered_json scenes = ordered_json::array();
  for (const auto& s : this->scenes) {
    ordered_json js;
    js["id"] = s.id;
    ordered_json objects = ordered_json::object();
    for (const auto& [id, text] : s.objects) objects[std::to_string(id)] = text;
    js["objects"] = objects;
    ordered_json views = ordered_json::array();
    for (const auto& v : s.views) {
      const auto& k = v.intrinsics;
      views.push_back({{"id", v.id},
                       {"image", v.image},
                       {"depth", v.depth},
                       {"mask", v.mask},
                       {"intrinsics",
                        {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}}}});
    }
    js["views"] = views;
    if (s.label_scores) js["label_scores"] = *s.label_scores;
    if (s.lpips_scores) js["lpips_scores"] = *s.lpips_scores;
    if (s.point_cloud) js["point_cloud"] = *s.point_cloud;
    scenes.push_back(std::move(js));
  }
  return ordered_json{{"scenes", scenes}}.dump(2) + "\n";
}

PointCloud read_point_cloud(const std::filesystem::path& path) {
  std::istringstream in(slurp(path));
  PointCloud cloud;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.front() == '#') continue;
    std::istringstream fields(line);
    Vec3 p;
    long id = 0;
    if (!(fields >> p.x >> p.y >> p.z >> id) || id < 0) {
      throw ConfigurationError(path.string() + " line " + std::to_string(lineno) + ": expected 'x y z object_id'");
    }
    cloud.points.push_back(p);
    cloud.object_ids.push_back(static_cast<ObjectId>(id));
  }
  cloud.validate();
  return cloud;
}

// ------------------------------------------------------------------ config

PipelineConfig PipelineConfig::from_json(const std::string& text) {
  PipelineConfig c;
  try {
    const json doc = json::parse(text);
    reject_unknown_keys(doc,
                        {"seed", "order_mode", "pixel_mix", "object_mix", "eps", "band", "view_mix",
                         "caption_client", "validator_client", "workers", "labels", "templates", "units"},
                        "config");
    c.seed = get_or<std::uint64_t>(doc, "seed", c.seed);
    if (doc.contains("order_mode")) c.order_mode = parse_order_mode(doc["order_mode"].get<std::string>());
    if (doc.contains("pixel_mix")) {
      const auto& j = doc["pixel_mix"];
      reject_unknown_keys(j, {"single_point", "comparison"}, "config pixel_mix");
      c.single_point_turns = get_or<std::size_t>(j, "single_point", c.single_point_turns);
      c.comparison_turns = get_or<std::size_t>(j, "comparison", c.comparison_turns);
    }
    if (doc.contains("object_mix")) {
      const auto& j = doc["object_mix"];
      reject_unknown_keys(j, {"bounding_cube", "left"}, "config object_mix");
      c.cube_turns = get_or<std::size_t>(j, "bounding_cube", c.cube_turns);
      c.predicate_turns = get_or<std::size_t>(j, "left", c.predicate_turns);
    }
    c.eps = get_or<double>(doc, "eps", c.eps);
    if (doc.contains("band")) {
      const auto& j = doc["band"];
      reject_unknown_keys(j, {"lo", "hi"}, "config band");
      c.band.lo = get_or<double>(j, "lo", c.band.lo);
      c.band.hi = get_or<double>(j, "hi", c.band.hi);
    }
    if (doc.contains("view_mix")) {
      const auto& j = doc["view_mix"];
      reject_unknown_keys(j, {"2", "4", "8"}, "config view_mix");
      c.view_mix.two = get_or<double>(j, "2", c.view_mix.two);
      c.view_mix.four = get_or<double>(j, "4", c.view_mix.four);
      c.view_mix.eight = get_or<double>(j, "8", c.view_mix.eight);
    }
    for (auto [key, target] : {std::pair{"caption_client", &c.caption_client},
                               std::pair{"validator_client", &c.validator_client}}) {
      if (!doc.contains(key)) continue;
      const auto& j = doc[key];
      reject_unknown_keys(j, {"kind", "endpoint"}, std::string("config ") + key);
      target->kind = get_or<std::string>(j, "kind", target->kind);
      target->endpoint = get_or<std::string>(j, "endpoint", target->endpoint);
    }
    c.workers = get_or<unsigned>(doc, "workers", c.workers);
    if (doc.contains("labels")) c.labels = doc["labels"].get<std::string>();
    if (doc.contains("templates")) c.templates = doc["templates"].get<std::string>();
    if (doc.contains("units")) {
      const auto units = doc["units"].get<std::string>();
      if (units == "words") {
        c.units = UnitStyle::words;
      } else if (units == "abbreviated") {
        c.units = UnitStyle::abbreviated;
      } else {
        throw ConfigurationError("config: units must be 'words' or 'abbreviated'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigurationError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::from_file(const std::filesystem::path& path) {
  auto c = from_json(slurp(path));
  const auto dir = path.parent_path();
  for (auto* ref : {&c.labels, &c.templates}) {
    if (*ref && std::filesystem::path(**ref).is_relative()) **ref = (dir / **ref).string();
  }
  return c;
}

std::string PipelineConfig::to_json() const {
  ordered_json j;
  j["seed"] = seed;
  j["order_mode"] = std::string(to_string(order_mode));
  j["pixel_mix"] = {{"single_point", single_point_turns}, {"comparison", comparison_turns}};
  j["object_mix"] = {{"bounding_cube", cube_turns}, {"left", predicate_turns}};
  j["eps"] = eps;
  j["band"] = {{"lo", band.lo}, {"hi", band.hi}};
  j["view_mix"] = {{"2", view_mix.two}, {"4", view_mix.four}, {"8", view_mix.eight}};
  j["caption_client"] = {{"kind", caption_client.kind}, {"endpoint", caption_client.endpoint}};
  j["validator_client"] = {{"kind", validator_client.kind}, {"endpoint", validator_client.endpoint}};
  j["workers"] = workers;
  if (labels) j["labels"] = *labels;
  if (templates) j["templates"] = *templates;
  j["units"] = units == UnitStyle::words ? "words" : "abbreviated";
  return j.dump(2) + "\n";
}

void PipelineConfig::apply_env() {
  if (const char* e = std::getenv("SPATIALCOT_CAPTION_ENDPOINT"); e && *e) {
    caption_client = {"http", e};
  }
  if (const char* e = std::getenv("SPATIALCOT_VALIDATOR_ENDPOINT"); e && *e) {
    validator_client = {"http", e};
  }
}

void PipelineConfig::validate() const {
  band.validate();
  for (double p : {view_mix.two, view_mix.four, view_mix.eight}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigurationError("view_mix proportions must lie in [0, 1]");
  }
  if (std::abs(view_mix.two + view_mix.four + view_mix.eight - 1.0) > 1e-9) {
    throw ConfigurationError("view_mix proportions must sum to 1");
  }
  if (workers == 0) throw ConfigurationError("workers must be at least 1");
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw ConfigurationError("eps must be finite and non-negative");
  if (caption_client.kind != "stub" && caption_client.kind != "http") {
    throw ConfigurationError("caption_client.kind must be 'stub' or 'http'");
  }
  if (validator_client.kind != "stub" && validator_client.kind != "always_true" &&
      validator_client.kind != "http") {
    throw ConfigurationError("validator_client.kind must be 'stub', 'always_true' or 'http'");
  }
  for (const auto* c : {&caption_client, &validator_client}) {
    if (c->kind == "http" && c->endpoint.empty()) throw ConfigurationError("http client needs an endpoint");
  }
  SynthOptions probe;
  probe.single_point_turns = single_point_turns;
  probe.comparison_turns = comparison_turns;
  probe.cube_turns = cube_turns;
  probe.predicate_turns = predicate_turns;
  probe.eps = eps;
  probe.validate();
}

// ----------------------------------------------------------------- records

std::string emit_record(const CorpusRecord& record) {
  const auto& conv = record.conversation;
  const auto problems = conversation_problems(conv);
  if (!problems.empty() || record.view_count == 0) {
    std::string msg = "refusing to emit " + (conv.id.empty() ? std::string("<unnamed>") : conv.id) + ":";
    for (const auto& p : problems) msg += " " + p + ";";
    if (record.view_count == 0) msg += " view_count is zero;";
    throw EmissionError(msg);
  }
  ordered_json j;
  j["id"] = conv.id;
  j["images"] = conv.image_refs;
  ordered_json messages = ordered_json::array();
  ordered_json levels = ordered_json::array();
  for (const auto& t : conv.turns) {
    messages.push_back({{"from", "human"}, {"value", t.question}});
    messages.push_back({{"from", "gpt"}, {"value", t.answer}});
    levels.push_back(std::string(to_string(t.level)));
  }
  j["conversations"] = std::move(messages);
  j["metadata"] = {{"order_mode", std::string(to_string(conv.order_mode))},
                   {"seed", conv.seed},
                   {"view_count", record.view_count},
                   {"tool_version", record.tool_version},
                   {"levels", std::move(levels)}};
  return j.dump(-1, ' ', false, json::error_handler_t::strict);
}

std::string emit_record(const Conversation& conv, std::size_t view_count) {
  return emit_record(CorpusRecord{conv, view_count, kToolVersion});
}

CorpusRecord parse_record(const std::string& line) {
  CorpusRecord rec;
  try {
    const json j = json::parse(line);
    auto require_keys = [](const json& obj, std::vector<std::string> want, const char* where) {
      if (!obj.is_object() || obj.size() != want.size()) {
        throw ConfigurationError(std::string("record ") + where + " has unexpected fields");
      }
      for (const auto& k : want) {
        if (!obj.contains(k)) throw ConfigurationError(std::string("record ") + where + " lacks '" + k + "'");
      }
    };
    require_keys(j, {"id", "images", "conversations", "metadata"}, "root");
    const auto& meta = j["metadata"];
    require_keys(meta, {"order_mode", "seed", "view_count", "tool_version", "levels"}, "metadata");
    auto& conv = rec.conversation;
    conv.id = j["id"].get<std::string>();
    conv.image_refs = j["images"].get<std::vector<std::string>>();
    conv.order_mode = parse_order_mode(meta["order_mode"].get<std::string>());
    conv.seed = meta["seed"].get<std::uint64_t>();
    rec.view_count = meta["view_count"].get<std::size_t>();
    rec.tool_version = meta["tool_version"].get<std::string>();
    const auto levels = meta["levels"].get<std::vector<std::string>>();
    const auto& messages = j["conversations"];
    if (!messages.is_array() || messages.size() != 2 * levels.size()) {
      throw ConfigurationError("record: message count does not match the level list");
    }
    for (std::size_t i = 0; i < levels.size(); ++i) {
      const auto& q = messages[2 * i];
      const auto& a = messages[2 * i + 1];
      require_keys(q, {"from", "value"}, "message");
      require_keys(a, {"from", "value"}, "message");
      if (q["from"] != "human" || a["from"] != "gpt") {
        throw ConfigurationError("record: messages must alternate human/gpt starting with human");
      }
      QATurn t;
      t.level = parse_level(levels[i]);
      t.question = q["value"].get<std::string>();
      t.answer = a["value"].get<std::string>();
      conv.turns.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw ConfigurationError(std::string("record: ") + e.what());
  } catch (const ConfigurationError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigurationError(std::string("record: ") + e.what());
  }
  return rec;
}

// ------------------------------------------------------------------ report

std::string RunReport::to_json() const {
  auto counts = [](const StageCounts& c) {
    return ordered_json{{"input", c.input}, {"admitted", c.admitted}, {"rejected", c.rejected}};
  };
  ordered_json j;
  j["records"] = records();
  j["stages"] = {{"ingest", counts(ingest)}, {"admission", counts(admission)}, {"synthesis", counts(synthesis)}};
  ordered_json views = ordered_json::object();
  for (const auto& [size, n] : view_counts) views[std::to_string(size)] = n;
  j["view_counts"] = views;
  j["validator_failures"] = validator_failures;
  ordered_json skipped_list = ordered_json::array();
  for (const auto& s : skipped) skipped_list.push_back({{"scene", s.scene}, {"stage", s.stage}, {"reason", s.reason}});
  j["skipped"] = skipped_list;
  return j.dump(2) + "\n";
}

// -------------------------------------------------------------------- run

namespace {

enum class Stage { ingest, admission, synthesis, done };

struct SceneResult {
  Stage reached = Stage::ingest;
  std::string reason;
  std::string line;
  std::size_t view_count = 0;
  bool validator_failed = false;
};

struct LoadedView {
  const ViewEntry* entry = nullptr;
  GrayImage image;
  DepthMap depth;
  SegmentationMask mask;
};

struct Shared {
  const Manifest& manifest;
  const PipelineConfig& config;
  SynthOptions options;
  const AdmissionLabelSet& labels;
};

std::vector<LoadedView> load_views(const SceneEntry& scene, const Manifest& manifest) {
  std::map<std::string, DepthMap> depths;
  std::map<std::string, SegmentationMask> masks;
  std::vector<LoadedView> views;
  for (const auto& v : scene.views) {
    LoadedView lv;
    lv.entry = &v;
    lv.image = read_gray(manifest.resolve(v.image));
    auto d = depths.find(v.depth);
    if (d == depths.end()) d = depths.emplace(v.depth, read_depth(manifest.resolve(v.depth))).first;
    auto m = masks.find(v.mask);
    if (m == masks.end()) m = masks.emplace(v.mask, read_mask(manifest.resolve(v.mask))).first;
    lv.depth = d->second;
    lv.mask = m->second;
    lv.mask.descriptions = scene.objects;
    lv.mask.validate();
    const auto& k = v.intrinsics;
    if (lv.depth.width != k.width || lv.depth.height != k.height || lv.mask.width != k.width ||
        lv.mask.height != k.height) {
      throw ConfigurationError("view " + v.id + ": depth, mask and intrinsics sizes disagree");
    }
    views.push_back(std::move(lv));
  }
  return views;
}

// Frames strictly between the anchors, evenly spaced, in trajectory order.
std::vector<std::string> pick_candidates(const std::vector<LoadedView>& views, std::size_t ia, std::size_t ib,
                                         std::size_t count) {
  std::vector<std::string> out;
  const std::size_t available = ib - ia - 1;
  for (std::size_t k = 0; k < count; ++k) out.push_back(views[ia + 1 + k * available / count].entry->id);
  return out;
}

SceneResult process_scene(const Shared& sh, std::size_t index) {
  const auto& scene = sh.manifest.scenes[index];
  const auto& cfg = sh.config;
  const std::uint64_t seed = derive_seed(cfg.seed, index);
  SceneResult r;

  std::vector<LoadedView> views;
  std::optional<PointCloud> fused;
  std::optional<PrecomputedBackend> lpips;
  std::map<std::string, LabelScores> label_scores;
  try {
    views = load_views(scene, sh.manifest);
    if (scene.point_cloud) fused = read_point_cloud(sh.manifest.resolve(*scene.point_cloud));
    if (scene.lpips_scores) lpips = PrecomputedBackend::from_file(sh.manifest.resolve(*scene.lpips_scores));
    if (scene.label_scores) {
      label_scores = read_label_scores(sh.manifest.resolve(*scene.label_scores), sh.labels.size());
    }
  } catch (const std::exception& e) {
    r.reason = e.what();
    return r;
  }

  r.reached = Stage::admission;
  std::size_t ref_index = 0;
  std::optional<ViewPair> anchors;
  std::vector<std::string> candidates;
  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < views.size(); ++i) position[views[i].entry->id] = i;
  try {
    if (views.size() == 1) {
      if (scene.label_scores) {
        const auto& id = views[0].entry->id;
        auto it = label_scores.find(id);
        if (it == label_scores.end()) throw ConfigurationError("no label scores for image " + id);
        if (!admit(it->second, sh.labels)) {
          r.reason = "label filter: top label is not a positive scene label";
          return r;
        }
      }
    } else {
      std::vector<Frame> frames;
      for (const auto& v : views) frames.push_back({v.entry->id, v.image});
      const ProxyBackend proxy;
      const PerceptualBackend& backend = lpips ? static_cast<const PerceptualBackend&>(*lpips) : proxy;
      std::vector<ViewPair> admitted;
      for (auto& p : score_pairs(frames, backend, cfg.band)) {
        if (p.admitted) admitted.push_back(std::move(p));
      }
      if (admitted.empty()) {
        r.reason = "no view pair inside the distance band";
        return r;
      }
      Rng rng(derive_seed(seed, 6));
      const double u = rng.uniform();
      std::size_t size = u < cfg.view_mix.two ? 2 : u < cfg.view_mix.two + cfg.view_mix.four ? 4 : 8;
      std::vector<const ViewPair*> eligible;
      for (;;) {
        eligible.clear();
        const std::size_t need = candidates_for(size);
        for (const auto& p : admitted) {
          if (position[p.ref_b] - position[p.ref_a] - 1 >= need) eligible.push_back(&p);
        }
        if (!eligible.empty() || size == 2) break;
        size /= 2;
      }
      const ViewPair& pair = *eligible[rng.index(eligible.size())];
      anchors = pair;
      candidates = pick_candidates(views, position[pair.ref_a], position[pair.ref_b], candidates_for(size));
      ref_index = position[rng.index(2) == 0 ? pair.ref_a : pair.ref_b];
    }
  } catch (const std::exception& e) {
    r.reason = e.what();
    return r;
  }

  r.reached = Stage::synthesis;
  try {
    const auto& ref = views[ref_index];
    const auto synth_scene = SynthScene::from_view(scene.id, ref.depth, ref.mask, ref.entry->intrinsics, fused);
    auto captions = make_caption_client(cfg.caption_client);
    auto conv = synthesize(synth_scene, scene.id, {ref.entry->image}, cfg.order_mode, seed, *captions, sh.options);
    std::size_t view_count = 1;
    if (anchors) {
      std::vector<std::pair<std::string, std::string>> anchor_qa;
      for (const auto& t : conv.turns) {
        if (t.level != Level::caption) anchor_qa.emplace_back(t.question, t.answer);
      }
      ViewSet set;
      try {
        std::map<std::string, GrayImage> images;
        if (cfg.validator_client.kind == "stub") {
          for (const auto& v : views) images[v.entry->id] = v.image;
        }
        auto validator = make_validator_client(cfg.validator_client, std::move(images));
        set = expand_viewpoints(*anchors, candidates, anchor_qa, *validator);
      } catch (const ServiceError&) {
        r.validator_failed = true;
        AlwaysTrueValidator unused;
        set = expand_viewpoints(*anchors, {}, {}, unused);
      }
      conv.image_refs = {ref.entry->image};
      for (const auto& f : set.frames) {
        const auto& image = views[position[f]].entry->image;
        if (position[f] != ref_index) conv.image_refs.push_back(image);
      }
      view_count = set.size();
    }
    r.line = emit_record(conv, view_count);
    r.view_count = view_count;
    r.reached = Stage::done;
  } catch (const std::exception& e) {
    r.reason = e.what();
  }
  return r;
}

}  // namespace

RunResult run_synthesis(const Manifest& manifest, const PipelineConfig& config) {
  config.validate();
  std::optional<TemplateBank> bank;
  if (config.templates) bank = TemplateBank::from_file(*config.templates);
  std::optional<AdmissionLabelSet> labels;
  if (config.labels) labels = AdmissionLabelSet::from_file(*config.labels);

  SynthOptions options;
  options.single_point_turns = config.single_point_turns;
  options.comparison_turns = config.comparison_turns;
  options.cube_turns = config.cube_turns;
  options.predicate_turns = config.predicate_turns;
  options.eps = config.eps;
  options.units = config.units;
  if (bank) options.bank = &*bank;
  options.validate();

  const Shared shared{manifest, config, options, labels ? *labels : AdmissionLabelSet::builtin()};
  const std::size_t n = manifest.scenes.size();
  std::vector<SceneResult> results(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) results[i] = process_scene(shared, i);
  };
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(config.workers, std::max<std::size_t>(n, 1)));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  RunResult out;
  auto& rep = out.report;
  rep.ingest.input = n;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = results[i];
    const auto& id = manifest.scenes[i].id;
    switch (r.reached) {
      case Stage::ingest:
        ++rep.ingest.rejected;
        rep.skipped.push_back({id, "ingest", r.reason});
        break;
      case Stage::admission:
        ++rep.ingest.admitted;
        ++rep.admission.rejected;
        rep.skipped.push_back({id, "admission", r.reason});
        break;
      case Stage::synthesis:
        ++rep.ingest.admitted;
        ++rep.admission.admitted;
        ++rep.synthesis.rejected;
        rep.skipped.push_back({id, "synthesis", r.reason});
        break;
      case Stage::done:
        ++rep.ingest.admitted;
        ++rep.admission.admitted;
        ++rep.synthesis.admitted;
        ++rep.view_counts[r.view_count];
        out.lines.push_back(r.line);
        break;
    }
    if (r.validator_failed) ++rep.validator_failures;
  }
  rep.admission.input = rep.ingest.admitted;
  rep.synthesis.input = rep.admission.admitted;
  return out;
}

void write_run(const RunResult& result, const std::filesystem::path& out) {
  {
    std::ofstream f(out, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + out.string());
    for (const auto& line : result.lines) f << line << '\n';
    if (!f) throw IoError("write failed for " + out.string());
  }
  const auto report_path = out.string() + ".report.json";
  std::ofstream f(report_path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + report_path);
  f << result.report.to_json();
  if (!f) throw IoError("write failed for " + report_path);
}

}  // namespace spatialcot
