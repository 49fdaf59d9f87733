// SPDX-License-Identifier: Apache-2.0
#include <httplib.h>

#include <nlohmann/json.hpp>

#include "spatialcot/errors.hpp"
#include "spatialcot/pipeline.hpp"

namespace spatialcot {

namespace {

using nlohmann::json;

// One JSON POST per call. The endpoint is `http://host:port`; the path is fixed per client.
json post_json(const std::string& endpoint, const std::string& path, const json& body,
               const std::string& subject) {
  httplib::Client client(endpoint);
  client.set_connection_timeout(5);
  client.set_read_timeout(30);
  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) {
    throw ServiceError(subject, "request to " + endpoint + path + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw ServiceError(subject, endpoint + path + " answered HTTP " + std::to_string(res->status),
                       res->status >= 500);
  }
  try {
    return json::parse(res->body);
  } catch (const json::exception& e) {
    throw ServiceError(subject, std::string("malformed response: ") + e.what(), false);
  }
}

class HttpCaptionClient final : public CaptionClient {
 public:
  explicit HttpCaptionClient(std::string endpoint) : endpoint_(std::move(endpoint)) {}

  std::array<std::string, 2> captions(const CaptionRequest& request) override {
    json cubes = json::array();
    for (const auto& c : request.cubes) {
      cubes.push_back({{"object_id", c.object_id},
                       {"min", {c.min_corner.x, c.min_corner.y, c.min_corner.z}},
                       {"max", {c.max_corner.x, c.max_corner.y, c.max_corner.z}}});
    }
    const json body = {{"conversation_id", request.conversation_id},
                       {"descriptions", request.descriptions},
                       {"cubes", cubes},
                       {"seed", request.seed}};
    const json reply = post_json(endpoint_, "/caption", body, request.conversation_id);
    try {
      const auto list = reply.at("captions").get<std::vector<std::string>>();
      if (list.size() != 2) throw ServiceError(request.conversation_id, "expected two captions", false);
      return {list[0], list[1]};
    } catch (const json::exception& e) {
      throw ServiceError(request.conversation_id, std::string("malformed captions: ") + e.what(), false);
    }
  }

 private:
  std::string endpoint_;
};

class HttpValidatorClient final : public ValidatorClient {
 public:
  explicit HttpValidatorClient(std::string endpoint) : endpoint_(std::move(endpoint)) {}

  bool validate(const ValidationRequest& request) override {
    const std::string subject = request.frame_ids.empty() ? "validator" : request.frame_ids.back();
    const json body = {{"question", request.question}, {"answer", request.answer}, {"frame_ids", request.frame_ids}};
    const json reply = post_json(endpoint_, "/validate", body, subject);
    try {
      return reply.at("valid").get<bool>();
    } catch (const json::exception& e) {
      throw ServiceError(subject, std::string("malformed vote: ") + e.what(), false);
    }
  }

 private:
  std::string endpoint_;
};

}  // namespace

std::unique_ptr<CaptionClient> make_caption_client(const ClientConfig& cfg) {
  if (cfg.kind == "stub") return std::make_unique<StubCaptionClient>();
  if (cfg.kind == "http") return std::make_unique<HttpCaptionClient>(cfg.endpoint);
  throw ConfigurationError("unknown caption client kind '" + cfg.kind + "'");
}

std::unique_ptr<ValidatorClient> make_validator_client(const ClientConfig& cfg,
                                                       std::map<std::string, GrayImage> images) {
  if (cfg.kind == "stub") return std::make_unique<ProxyValidator>(std::move(images));
  if (cfg.kind == "always_true") return std::make_unique<AlwaysTrueValidator>();
  if (cfg.kind == "http") return std::make_unique<HttpValidatorClient>(cfg.endpoint);
  throw ConfigurationError("unknown validator client kind '" + cfg.kind + "'");
}

}  // namespace spatialcot
