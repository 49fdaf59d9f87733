// SPDX-License-Identifier: Apache-2.0
#include "spatialcot/reasoning.hpp"

#include <algorithm>

#include "spatialcot/errors.hpp"
#include "spatialcot/rng.hpp"

namespace spatialcot {

std::string_view to_string(OrderMode mode) {
  switch (mode) {
    case OrderMode::forward: return "forward";
    case OrderMode::reverse: return "reverse";
    case OrderMode::random: return "random";
  }
  return "?";
}

OrderMode parse_order_mode(std::string_view s) {
  for (OrderMode m : {OrderMode::forward, OrderMode::reverse, OrderMode::random}) {
    if (to_string(m) == s) return m;
  }
  throw ConfigurationError("unknown order mode '" + std::string(s) + "'");
}

std::string format_pixel(int u, int v) {
  return "(" + std::to_string(u) + ", " + std::to_string(v) + ")";
}

std::string format_point(const Vec3& p) {
  return "(" + format_coordinate(p.x) + ", " + format_coordinate(p.y) + ", " +
         format_coordinate(p.z) + ")";
}

std::string format_cube(const BoundingCube& cube) {
  return format_point(cube.min_corner) + " to " + format_point(cube.max_corner);
}

SynthScene SynthScene::from_view(std::string id, DepthMap depth, SegmentationMask mask,
                                 CameraIntrinsics intrinsics,
                                 const std::optional<PointCloud>& fused) {
  mask.validate();
  SynthScene scene;
  scene.id = std::move(id);
  scene.descriptions = mask.descriptions;
  std::vector<BoundingCube> all;
  if (fused) {
    fused->validate();
    all = bounding_cubes(*fused);
  } else {
    all = bounding_cubes(backproject(depth, mask, intrinsics));
  }
  for (auto& c : all) {
    if (scene.descriptions.contains(c.object_id)) scene.cubes.push_back(c);
  }
  scene.depth = std::move(depth);
  scene.mask = std::move(mask);
  scene.intrinsics = intrinsics;
  return scene;
}

const BoundingCube& SynthScene::cube(ObjectId id) const {
  for (const auto& c : cubes) {
    if (c.object_id == id) return c;
  }
  throw NotFoundError("scene " + this->id + ": no cube for object " + std::to_string(id));
}

const std::string& SynthScene::description(ObjectId id) const {
  auto it = descriptions.find(id);
  if (it == descriptions.end()) {
    throw NotFoundError("scene " + this->id + ": no description for object " + std::to_string(id));
  }
  return it->second;
}

void SynthOptions::validate() const {
  if (single_point_turns + comparison_turns != kPixelTurns) {
    throw ConfigurationError("pixel turn mix must sum to 5");
  }
  if (cube_turns + predicate_turns != kObjectTurns) {
    throw ConfigurationError("object turn mix must sum to 4");
  }
  if (!(eps >= 0.0)) throw ConfigurationError("predicate dead zone must be non-negative");
  if (bank == nullptr) throw ConfigurationError("no template bank");
  bank->require_complete();
}

namespace {

using Pixel = std::pair<int, int>;

const Template& template_at(const TemplateBank& bank, TemplateCell cell, std::size_t index) {
  auto list = bank.cell(cell);
  if (index >= list.size()) throw ConfigurationError("template index out of range");
  return list[index];
}

// Rendering shared by synthesis and replay.

QATurn single_point_turn(const SynthScene& scene, Pixel px, std::size_t qi, std::size_t ai,
                         const SynthOptions& opt) {
  const auto& bank = *opt.bank;
  const double depth = scene.depth.at(px.first, px.second);
  const Bindings b = {{'A', format_pixel(px.first, px.second)},
                      {'X', render_depth(depth, opt.units).text}};
  QATurn t;
  t.level = Level::pixel;
  t.question = instantiate(template_at(bank, {Level::pixel, Family::single_point, Kind::question}, qi), b);
  t.answer = instantiate(template_at(bank, {Level::pixel, Family::single_point, Kind::answer}, ai), b);
  t.provenance.family = Family::single_point;
  t.provenance.pixels = {px};
  t.provenance.values = {depth};
  t.provenance.question_template = qi;
  t.provenance.answer_kind = Kind::answer;
  t.provenance.answer_template = ai;
  return t;
}

Kind comparison_kind(double da, double db) {
  return da < db ? Kind::true_response : Kind::false_response;
}

QATurn comparison_turn(const SynthScene& scene, Pixel pa, Pixel pb, std::size_t qi, Kind kind,
                       std::size_t ai, const SynthOptions& opt) {
  const auto& bank = *opt.bank;
  const double da = scene.depth.at(pa.first, pa.second);
  const double db = scene.depth.at(pb.first, pb.second);
  const Bindings b = {{'A', format_pixel(pa.first, pa.second)},
                      {'B', format_pixel(pb.first, pb.second)}};
  QATurn t;
  t.level = Level::pixel;
  t.question = instantiate(template_at(bank, {Level::pixel, Family::close, Kind::question}, qi), b);
  t.answer = instantiate(template_at(bank, {Level::pixel, Family::close, kind}, ai), b);
  t.provenance.family = Family::close;
  t.provenance.pixels = {pa, pb};
  t.provenance.values = {da, db};
  t.provenance.question_template = qi;
  t.provenance.answer_kind = kind;
  t.provenance.answer_template = ai;
  return t;
}

bool is_two_object(const Template& question) { return question.has_slot('B'); }

/// Answers usable with a cube question: two-object questions need an answer
/// that binds both cubes ([Y]) or a bare [X]; single-object questions need
/// one without [Y].
bool cube_answer_fits(const Template& question, const Template& answer) {
  if (is_two_object(question)) return answer.has_slot('Y') || answer.slots == "X";
  return !answer.has_slot('Y') && !answer.has_slot('B');
}

QATurn cube_turn(const SynthScene& scene, const std::vector<ObjectId>& objects, std::size_t qi,
                 std::size_t ai, const SynthOptions& opt) {
  const auto& bank = *opt.bank;
  const auto& q = template_at(bank, {Level::object, Family::bounding_cube, Kind::question}, qi);
  const auto& a = template_at(bank, {Level::object, Family::bounding_cube, Kind::answer}, ai);
  if (!cube_answer_fits(q, a)) throw ConfigurationError("cube answer does not fit question");
  if (objects.size() != (is_two_object(q) ? 2u : 1u)) {
    throw SynthesisError("cube turn: wrong object count for template");
  }
  QATurn t;
  t.level = Level::object;
  Bindings b;
  b['A'] = scene.description(objects[0]);
  const auto& ca = scene.cube(objects[0]);
  if (objects.size() == 2) {
    b['B'] = scene.description(objects[1]);
    const auto& cb = scene.cube(objects[1]);
    if (a.has_slot('Y')) {
      b['X'] = format_cube(ca);
      b['Y'] = format_cube(cb);
    } else {
      b['X'] = b['A'] + " in " + format_cube(ca) + " and " + b['B'] + " in " + format_cube(cb);
    }
    for (const auto* c : {&ca, &cb}) {
      t.provenance.values.insert(t.provenance.values.end(),
                                 {c->min_corner.x, c->min_corner.y, c->min_corner.z,
                                  c->max_corner.x, c->max_corner.y, c->max_corner.z});
    }
  } else {
    const Vec3 center = ca.center();
    b['X'] = format_point(center);
    t.provenance.values = {center.x, center.y, center.z};
  }
  t.question = instantiate(q, b);
  t.answer = instantiate(a, b);
  t.provenance.family = Family::bounding_cube;
  t.provenance.objects = objects;
  t.provenance.question_template = qi;
  t.provenance.answer_kind = Kind::answer;
  t.provenance.answer_template = ai;
  return t;
}

QATurn left_turn(const SynthScene& scene, ObjectId ida, ObjectId idb, std::size_t qi, Kind kind,
                 std::size_t ai, const SynthOptions& opt) {
  const auto& bank = *opt.bank;
  const Bindings b = {{'A', scene.description(ida)}, {'B', scene.description(idb)}};
  const Vec3 ca = scene.cube(ida).center();
  const Vec3 cb = scene.cube(idb).center();
  QATurn t;
  t.level = Level::object;
  t.question = instantiate(template_at(bank, {Level::object, Family::left, Kind::question}, qi), b);
  t.answer = instantiate(template_at(bank, {Level::object, Family::left, kind}, ai), b);
  t.provenance.family = Family::left;
  t.provenance.objects = {ida, idb};
  t.provenance.values = {ca.x, cb.x};
  t.provenance.question_template = qi;
  t.provenance.answer_kind = kind;
  t.provenance.answer_template = ai;
  return t;
}

QATurn distance_turn(const SynthScene& scene, ObjectId ida, ObjectId idb, std::size_t qi,
                     std::size_t ai, const SynthOptions& opt) {
  const auto& bank = *opt.bank;
  const double d = spatial_relation(scene.cube(ida), scene.cube(idb), opt.eps).center_distance;
  const Bindings b = {{'A', scene.description(ida)},
                      {'B', scene.description(idb)},
                      {'X', render_distance(d, opt.units).text}};
  QATurn t;
  t.level = Level::scene;
  t.question = instantiate(template_at(bank, {Level::scene, Family::distance, Kind::question}, qi), b);
  t.answer = instantiate(template_at(bank, {Level::scene, Family::distance, Kind::answer}, ai), b);
  t.provenance.family = Family::distance;
  t.provenance.objects = {ida, idb};
  t.provenance.values = {d};
  t.provenance.question_template = qi;
  t.provenance.answer_kind = Kind::answer;
  t.provenance.answer_template = ai;
  return t;
}

/// Valid-depth pixels inside each described object's 2D box, per object.
std::vector<std::vector<Pixel>> pixel_pools(const SynthScene& scene) {
  std::vector<std::vector<Pixel>> pools;
  for (const auto& [id, box] : pixel_boxes(scene.mask)) {
    if (!scene.descriptions.contains(id)) continue;
    std::vector<Pixel> pool;
    for (int v = box.v_min; v <= box.v_max; ++v) {
      for (int u = box.u_min; u <= box.u_max; ++u) {
        if (scene.depth.is_valid(u, v)) pool.emplace_back(u, v);
      }
    }
    if (!pool.empty()) pools.push_back(std::move(pool));
  }
  return pools;
}

Pixel draw_pixel(const std::vector<std::vector<Pixel>>& pools, Rng& rng) {
  const auto& pool = pools[rng.index(pools.size())];
  return pool[rng.index(pool.size())];
}

/// Draws two distinct objects, returned in draw order.
std::pair<ObjectId, ObjectId> draw_object_pair(const SynthScene& scene, Rng& rng) {
  const std::size_t n = scene.cubes.size();
  const std::size_t i = rng.index(n);
  std::size_t j = rng.index(n - 1);
  if (j >= i) ++j;
  return {scene.cubes[i].object_id, scene.cubes[j].object_id};
}

void require_objects(const SynthScene& scene, const char* what) {
  if (scene.cubes.size() < 2) {
    throw SynthesisError(std::string(what) + ": insufficient objects (need at least 2, scene " +
                         scene.id + " has " + std::to_string(scene.cubes.size()) + ")");
  }
}

}  // namespace

std::vector<QATurn> build_pixel_turns(const SynthScene& scene, std::uint64_t seed,
                                      const SynthOptions& options) {
  options.validate();
  const auto pools = pixel_pools(scene);
  std::size_t distinct = 0;
  {
    std::vector<Pixel> all;
    for (const auto& p : pools) all.insert(all.end(), p.begin(), p.end());
    std::sort(all.begin(), all.end());
    distinct = static_cast<std::size_t>(std::unique(all.begin(), all.end()) - all.begin());
  }
  if (distinct < 2) {
    throw SynthesisError("pixel turns: insufficient valid pixels inside object boxes (scene " +
                         scene.id + ")");
  }

  Rng rng(seed);
  const auto& bank = *options.bank;
  std::vector<Family> plan(options.single_point_turns, Family::single_point);
  plan.insert(plan.end(), options.comparison_turns, Family::close);
  rng.shuffle(plan);

  std::vector<QATurn> turns;
  for (Family f : plan) {
    if (f == Family::single_point) {
      const Pixel px = draw_pixel(pools, rng);
      const auto qi = bank.sample({Level::pixel, Family::single_point, Kind::question}, rng).index;
      const auto ai = bank.sample({Level::pixel, Family::single_point, Kind::answer}, rng).index;
      turns.push_back(single_point_turn(scene, px, qi, ai, options));
      continue;
    }
    Pixel pa = draw_pixel(pools, rng);
    Pixel pb = draw_pixel(pools, rng);
    // Prefer two pixels at different depths; flat scenes fall through to a tie.
    for (int attempt = 0; attempt < 16; ++attempt) {
      if (pa != pb && scene.depth.at(pa.first, pa.second) != scene.depth.at(pb.first, pb.second)) {
        break;
      }
      pb = draw_pixel(pools, rng);
    }
    while (pa == pb) pb = draw_pixel(pools, rng);
    const double da = scene.depth.at(pa.first, pa.second);
    const double db = scene.depth.at(pb.first, pb.second);
    const Kind kind = comparison_kind(da, db);
    const auto qi = bank.sample({Level::pixel, Family::close, Kind::question}, rng).index;
    // A tie uses the first negative response, which must not assert the reverse ordering.
    const auto ai = da == db ? 0 : bank.sample({Level::pixel, Family::close, kind}, rng).index;
    turns.push_back(comparison_turn(scene, pa, pb, qi, kind, ai, options));
  }
  return turns;
}

std::vector<QATurn> build_object_turns(const SynthScene& scene, std::uint64_t seed,
                                       const SynthOptions& options) {
  options.validate();
  require_objects(scene, "object turns");
  Rng rng(seed);
  const auto& bank = *options.bank;
  std::vector<Family> plan(options.cube_turns, Family::bounding_cube);
  plan.insert(plan.end(), options.predicate_turns, Family::left);
  rng.shuffle(plan);

  std::vector<QATurn> turns;
  for (Family f : plan) {
    if (f == Family::bounding_cube) {
      const auto& q = bank.sample({Level::object, Family::bounding_cube, Kind::question}, rng);
      std::vector<std::size_t> fits;
      for (const auto& a : bank.cell({Level::object, Family::bounding_cube, Kind::answer})) {
        if (cube_answer_fits(q, a)) fits.push_back(a.index);
      }
      if (fits.empty()) throw ConfigurationError("no cube answer template fits: " + q.text);
      const std::size_t ai = fits[rng.index(fits.size())];
      std::vector<ObjectId> objects;
      if (is_two_object(q)) {
        auto [a, b] = draw_object_pair(scene, rng);
        objects = {a, b};
      } else {
        objects = {scene.cubes[rng.index(scene.cubes.size())].object_id};
      }
      turns.push_back(cube_turn(scene, objects, q.index, ai, options));
      continue;
    }
    auto [ida, idb] = draw_object_pair(scene, rng);
    const bool truth = spatial_relation(scene.cube(ida), scene.cube(idb), options.eps).left_of;
    const Kind kind = truth ? Kind::true_response : Kind::false_response;
    const auto qi = bank.sample({Level::object, Family::left, Kind::question}, rng).index;
    const auto ai = bank.sample({Level::object, Family::left, kind}, rng).index;
    turns.push_back(left_turn(scene, ida, idb, qi, kind, ai, options));
  }
  return turns;
}

QATurn build_scene_turn(const SynthScene& scene, std::uint64_t seed, const SynthOptions& options) {
  options.validate();
  require_objects(scene, "scene turn");
  Rng rng(seed);
  const auto& bank = *options.bank;
  auto [ida, idb] = draw_object_pair(scene, rng);
  const auto qi = bank.sample({Level::scene, Family::distance, Kind::question}, rng).index;
  const auto ai = bank.sample({Level::scene, Family::distance, Kind::answer}, rng).index;
  return distance_turn(scene, ida, idb, qi, ai, options);
}

CaptionRequest make_caption_request(const SynthScene& scene, std::string conversation_id,
                                    std::uint64_t seed) {
  CaptionRequest req;
  req.conversation_id = std::move(conversation_id);
  req.seed = seed;
  for (const auto& c : scene.cubes) {
    req.descriptions.push_back(scene.description(c.object_id));
    req.cubes.push_back(c);
  }
  return req;
}

namespace {

std::string join_descriptions(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += i + 1 == items.size() ? " and " : ", ";
    out += items[i];
  }
  return out;
}

}  // namespace

std::array<std::string, 2> caption_stub(const CaptionRequest& request) {
  if (request.descriptions.empty()) {
    throw SynthesisError("caption: no described objects in " + request.conversation_id);
  }
  if (request.cubes.size() != request.descriptions.size()) {
    throw ConfigurationError("caption: descriptions and cubes differ in length");
  }
  Rng rng(request.seed);
  std::array<std::string, 2> out;
  const std::string inventory = join_descriptions(request.descriptions);
  switch (rng.index(3)) {
    case 0: out[0] = "The scene contains the following objects: " + inventory + "."; break;
    case 1: out[0] = "Objects visible in this scene: " + inventory + "."; break;
    default: out[0] = "This image shows " + inventory + "."; break;
  }

  if (request.cubes.size() == 1) {
    out[1] = "The " + request.descriptions[0] + " is the only object identified in the scene.";
    return out;
  }
  std::size_t nearest = 0;
  std::size_t farthest = 0;
  for (std::size_t i = 1; i < request.cubes.size(); ++i) {
    const double z = request.cubes[i].center().z;
    if (z < request.cubes[nearest].center().z) nearest = i;
    if (z > request.cubes[farthest].center().z) farthest = i;
  }
  const auto& near = request.descriptions[nearest];
  const auto& far = request.descriptions[farthest];
  switch (rng.index(2)) {
    case 0:
      out[1] = "The " + near + " is the nearest object to the viewer, while the " + far +
               " is the farthest.";
      break;
    default:
      out[1] = "Closest to the viewer is the " + near + "; the " + far + " is farthest away.";
      break;
  }
  return out;
}

std::vector<QATurn> attach_caption_turns(const SynthScene& scene,
                                         const std::string& conversation_id,
                                         CaptionClient& client, std::uint64_t seed) {
  std::array<std::string, 2> captions;
  try {
    captions = client.captions(make_caption_request(scene, conversation_id, seed));
  } catch (const ServiceError&) {
    throw;
  } catch (const SynthesisError&) {
    throw;
  } catch (const std::exception& e) {
    throw ServiceError(conversation_id, std::string("caption client failed: ") + e.what());
  }
  std::vector<QATurn> turns;
  for (std::size_t i = 0; i < 2; ++i) {
    if (captions[i].empty()) throw ServiceError(conversation_id, "caption client returned an empty caption");
    QATurn t;
    t.level = Level::caption;
    t.question = kCaptionQuestions[i];
    t.answer = std::move(captions[i]);
    turns.push_back(std::move(t));
  }
  return turns;
}

std::array<Level, 3> block_order(OrderMode mode, std::uint64_t seed) {
  switch (mode) {
    case OrderMode::forward: return {Level::pixel, Level::object, Level::scene};
    case OrderMode::reverse: return {Level::scene, Level::object, Level::pixel};
    case OrderMode::random: {
      std::vector<Level> levels = {Level::pixel, Level::object, Level::scene};
      Rng rng(seed);
      rng.shuffle(levels);
      return {levels[0], levels[1], levels[2]};
    }
  }
  return {Level::pixel, Level::object, Level::scene};
}

Conversation assemble(TurnGroups groups, OrderMode mode, std::uint64_t seed, std::string id,
                      std::vector<std::string> image_refs) {
  auto check = [](const std::vector<QATurn>& g, std::size_t n, Level level, const char* name) {
    if (g.size() != n) {
      throw CompositionError(std::string(name) + " group has " + std::to_string(g.size()) +
                             " turns, expected " + std::to_string(n));
    }
    for (const auto& t : g) {
      if (t.level != level) throw CompositionError(std::string(name) + " group has a foreign turn");
    }
  };
  check(groups.pixel, kPixelTurns, Level::pixel, "pixel");
  check(groups.object, kObjectTurns, Level::object, "object");
  check(groups.scene, kSceneTurns, Level::scene, "scene");
  check(groups.caption, kCaptionTurns, Level::caption, "caption");

  Conversation conv;
  conv.id = std::move(id);
  conv.image_refs = std::move(image_refs);
  conv.order_mode = mode;
  conv.seed = seed;
  for (Level level : block_order(mode, seed)) {
    auto& g = level == Level::pixel ? groups.pixel
              : level == Level::object ? groups.object
                                       : groups.scene;
    std::move(g.begin(), g.end(), std::back_inserter(conv.turns));
  }
  std::move(groups.caption.begin(), groups.caption.end(), std::back_inserter(conv.turns));
  return conv;
}

Conversation synthesize(const SynthScene& scene, std::string id,
                        std::vector<std::string> image_refs, OrderMode mode, std::uint64_t seed,
                        CaptionClient& captions, const SynthOptions& options) {
  TurnGroups groups;
  groups.pixel = build_pixel_turns(scene, derive_seed(seed, 1), options);
  groups.object = build_object_turns(scene, derive_seed(seed, 2), options);
  groups.scene = {build_scene_turn(scene, derive_seed(seed, 3), options)};
  groups.caption = attach_caption_turns(scene, id, captions, derive_seed(seed, 4));
  return assemble(std::move(groups), mode, derive_seed(seed, 5), std::move(id),
                  std::move(image_refs));
}

std::vector<std::string> conversation_problems(const Conversation& conv) {
  std::vector<std::string> problems;
  if (conv.id.empty()) problems.emplace_back("empty id");
  if (conv.image_refs.empty()) problems.emplace_back("no image references");
  if (conv.turns.size() != kTurnsPerConversation) {
    problems.push_back("has " + std::to_string(conv.turns.size()) + " turns, expected 12");
    return problems;
  }
  std::map<Level, std::size_t> counts;
  for (std::size_t i = 0; i < conv.turns.size(); ++i) {
    const auto& t = conv.turns[i];
    ++counts[t.level];
    if (t.question.empty() || t.answer.empty()) {
      problems.push_back("turn " + std::to_string(i) + " has an empty message");
    }
  }
  if (counts[Level::pixel] != kPixelTurns || counts[Level::object] != kObjectTurns ||
      counts[Level::scene] != kSceneTurns || counts[Level::caption] != kCaptionTurns) {
    problems.emplace_back("level composition is not 5/4/1/2");
    return problems;
  }
  if (conv.turns[10].level != Level::caption || conv.turns[11].level != Level::caption) {
    problems.emplace_back("caption turns are not last");
  }
  // Spatial levels must form contiguous blocks.
  std::vector<Level> blocks;
  for (std::size_t i = 0; i < 10; ++i) {
    if (blocks.empty() || blocks.back() != conv.turns[i].level) blocks.push_back(conv.turns[i].level);
  }
  if (blocks.size() != 3) {
    problems.emplace_back("spatial levels are interleaved");
  } else if (conv.order_mode != OrderMode::random) {
    const auto expected = block_order(conv.order_mode, 0);
    if (!std::equal(blocks.begin(), blocks.end(), expected.begin())) {
      problems.push_back("block order does not match " + std::string(to_string(conv.order_mode)));
    }
  }
  return problems;
}

std::pair<std::string, std::string> replay_turn(const QATurn& turn, const SynthScene& scene,
                                                const SynthOptions& options) {
  const auto& p = turn.provenance;
  if (!p.family) return {turn.question, turn.answer};
  QATurn t;
  switch (*p.family) {
    case Family::single_point:
      t = single_point_turn(scene, p.pixels.at(0), p.question_template, p.answer_template, options);
      break;
    case Family::close: {
      const auto pa = p.pixels.at(0);
      const auto pb = p.pixels.at(1);
      const Kind kind = comparison_kind(scene.depth.at(pa.first, pa.second),
                                        scene.depth.at(pb.first, pb.second));
      t = comparison_turn(scene, pa, pb, p.question_template, kind, p.answer_template, options);
      break;
    }
    case Family::bounding_cube:
      t = cube_turn(scene, p.objects, p.question_template, p.answer_template, options);
      break;
    case Family::left: {
      const bool truth =
          spatial_relation(scene.cube(p.objects.at(0)), scene.cube(p.objects.at(1)), options.eps)
              .left_of;
      t = left_turn(scene, p.objects.at(0), p.objects.at(1), p.question_template,
                    truth ? Kind::true_response : Kind::false_response, p.answer_template, options);
      break;
    }
    case Family::distance:
      t = distance_turn(scene, p.objects.at(0), p.objects.at(1), p.question_template,
                        p.answer_template, options);
      break;
  }
  return {t.question, t.answer};
}

}  // namespace spatialcot
