// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "spatialcot/geometry.hpp"
#include "spatialcot/qa_bank.hpp"

namespace spatialcot {

inline constexpr std::size_t kPixelTurns = 5;
inline constexpr std::size_t kObjectTurns = 4;
inline constexpr std::size_t kSceneTurns = 1;
inline constexpr std::size_t kCaptionTurns = 2;
inline constexpr std::size_t kTurnsPerConversation =
    kPixelTurns + kObjectTurns + kSceneTurns + kCaptionTurns;

/// Geometry a spatial turn was derived from. Enough to recompute the turn
/// exactly from the scene (see replay_turn).
struct Provenance {
  std::optional<Family> family;  // empty for caption turns
  std::vector<std::pair<int, int>> pixels;
  std::vector<ObjectId> objects;
  std::vector<double> values;
  std::size_t question_template = 0;
  Kind answer_kind = Kind::answer;
  std::size_t answer_template = 0;
};

struct QATurn {
  Level level = Level::pixel;
  std::string question;
  std::string answer;
  Provenance provenance;
};

enum class OrderMode { forward, reverse, random };

std::string_view to_string(OrderMode mode);
OrderMode parse_order_mode(std::string_view s);

struct Conversation {
  std::string id;
  std::vector<std::string> image_refs;
  std::vector<QATurn> turns;
  OrderMode order_mode = OrderMode::forward;
  std::uint64_t seed = 0;
};

/// Everything synthesis needs about one scene: the reference view used for
/// pixel questions and the object cubes in the canonical frame.
struct SynthScene {
  std::string id;
  DepthMap depth;
  SegmentationMask mask;
  CameraIntrinsics intrinsics;
  std::vector<BoundingCube> cubes;  // described objects only, ordered by id
  std::map<ObjectId, std::string> descriptions;

  /// Cubes come from `fused` when given, otherwise from backprojecting the view.
  static SynthScene from_view(std::string id, DepthMap depth, SegmentationMask mask,
                              CameraIntrinsics intrinsics,
                              const std::optional<PointCloud>& fused = std::nullopt);

  const BoundingCube& cube(ObjectId id) const;
  const std::string& description(ObjectId id) const;
};

struct SynthOptions {
  std::size_t single_point_turns = 3;
  std::size_t comparison_turns = 2;
  std::size_t cube_turns = 2;
  std::size_t predicate_turns = 2;
  double eps = kDefaultRelationEps;
  UnitStyle units = UnitStyle::words;
  const TemplateBank* bank = &TemplateBank::builtin();

  void validate() const;
};

std::vector<QATurn> build_pixel_turns(const SynthScene& scene, std::uint64_t seed,
                                      const SynthOptions& options = {});
std::vector<QATurn> build_object_turns(const SynthScene& scene, std::uint64_t seed,
                                       const SynthOptions& options = {});
QATurn build_scene_turn(const SynthScene& scene, std::uint64_t seed,
                        const SynthOptions& options = {});

struct CaptionRequest {
  std::string conversation_id;
  std::vector<std::string> descriptions;  // ordered by object id
  std::vector<BoundingCube> cubes;
  std::uint64_t seed = 0;
};

CaptionRequest make_caption_request(const SynthScene& scene, std::string conversation_id,
                                    std::uint64_t seed);

/// Source of the two trailing scene captions. Implementations signal
/// failure by throwing; attach_caption_turns rewraps anything thrown into a
/// ServiceError carrying the conversation id.
class CaptionClient {
 public:
  virtual ~CaptionClient() = default;
  virtual std::array<std::string, 2> captions(const CaptionRequest& request) = 0;
};

/// Templated captions: an object inventory and the nearest/farthest object
/// by cube-center depth. Throws SynthesisError when nothing is described.
std::array<std::string, 2> caption_stub(const CaptionRequest& request);

class StubCaptionClient final : public CaptionClient {
 public:
  std::array<std::string, 2> captions(const CaptionRequest& request) override {
    return caption_stub(request);
  }
};

inline constexpr std::array<const char*, 2> kCaptionQuestions = {
    "Describe the scene in the image.",
    "Give a short caption summarizing the layout of the scene.",
};

std::vector<QATurn> attach_caption_turns(const SynthScene& scene,
                                         const std::string& conversation_id,
                                         CaptionClient& client, std::uint64_t seed);

struct TurnGroups {
  std::vector<QATurn> pixel;
  std::vector<QATurn> object;
  std::vector<QATurn> scene;
  std::vector<QATurn> caption;
};

/// Orders the level blocks and appends captions. Throws CompositionError
/// unless the groups hold exactly 5/4/1/2 turns of the right levels.
Conversation assemble(TurnGroups groups, OrderMode mode, std::uint64_t seed, std::string id,
                      std::vector<std::string> image_refs);

/// Level order of the three spatial blocks for a given mode and seed.
std::array<Level, 3> block_order(OrderMode mode, std::uint64_t seed);

/// Full 12-turn synthesis for one scene. Stage seeds are derived from `seed`.
Conversation synthesize(const SynthScene& scene, std::string id,
                        std::vector<std::string> image_refs, OrderMode mode, std::uint64_t seed,
                        CaptionClient& captions, const SynthOptions& options = {});

/// Human-readable invariant violations; empty when the conversation is well formed.
std::vector<std::string> conversation_problems(const Conversation& conv);

/// Recomputes a spatial turn's question and answer from its provenance and
/// the scene. Caption turns are returned unchanged.
std::pair<std::string, std::string> replay_turn(const QATurn& turn, const SynthScene& scene,
                                                const SynthOptions& options = {});

std::string format_pixel(int u, int v);
std::string format_point(const Vec3& p);
std::string format_cube(const BoundingCube& cube);

}  // namespace spatialcot
