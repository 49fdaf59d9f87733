// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "spatialcot/errors.hpp"
#include "spatialcot/pipeline.hpp"

using namespace spatialcot;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("spatialcot_pipeline_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Manifest synthetic(const std::string& name, SyntheticOptions opt) {
  return Manifest::from_file(write_synthetic_manifest(scratch(name), opt));
}

std::string joined(const RunResult& r) {
  std::string s;
  for (const auto& l : r.lines) s += l + "\n";
  return s;
}

Conversation sample_conversation() {
  const auto m = synthetic("sample", {.scenes = 1});
  PipelineConfig cfg;
  const auto r = run_synthesis(m, cfg);
  return parse_record(r.lines.at(0)).conversation;
}

// Local HTTP services standing in for the caption model and the validator.
class FakeServices {
 public:
  FakeServices() {
    server_.Post("/caption", [](const httplib::Request& req, httplib::Response& res) {
      const auto body = json::parse(req.body);
      res.set_content(json{{"captions", {"remote " + body.at("conversation_id").get<std::string>(), "second"}}}.dump(),
                      "application/json");
    });
    server_.Post("/validate", [this](const httplib::Request& req, httplib::Response& res) {
      const auto body = json::parse(req.body);
      ++validations;
      res.set_content(json{{"valid", body.at("frame_ids").size() == 3}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServices() {
    server_.stop();
    thread_.join();
  }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }
  std::atomic<int> validations{0};

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST(Pipeline, TenScenesGiveTenRecordsOfTwentyFourMessages) {
  const auto m = synthetic("ten", {.scenes = 10});
  const auto r = run_synthesis(m, PipelineConfig{});
  ASSERT_EQ(r.lines.size(), 10u);
  for (const auto& line : r.lines) {
    const auto j = json::parse(line);
    ASSERT_EQ(j.at("conversations").size(), 24u);
    for (std::size_t i = 0; i < 24; ++i) {
      EXPECT_EQ(j["conversations"][i]["from"], i % 2 == 0 ? "human" : "gpt");
    }
    EXPECT_EQ(j["metadata"]["tool_version"], "0.1.0");
    EXPECT_EQ(j["metadata"]["view_count"], 1);
  }
  EXPECT_EQ(r.report.records(), 10u);
  EXPECT_EQ(r.report.view_counts.at(1), 10u);
}

TEST(Pipeline, SingleObjectScenesAreSkipped) {
  const auto m = synthetic("single", {.scenes = 6, .single_object_every = 3});
  const auto r = run_synthesis(m, PipelineConfig{});
  EXPECT_EQ(r.lines.size(), 4u);
  ASSERT_EQ(r.report.skipped.size(), 2u);
  for (const auto& s : r.report.skipped) {
    EXPECT_EQ(s.stage, "synthesis");
    EXPECT_NE(s.reason.find("insufficient objects"), std::string::npos);
  }
}

TEST(Pipeline, ReportAccountsForEveryScene) {
  const auto m = synthetic("mixed", {.scenes = 24, .single_object_every = 5, .reject_every = 4, .multi_view_every = 3});
  const auto r = run_synthesis(m, PipelineConfig{});
  const auto& rep = r.report;
  EXPECT_EQ(rep.ingest.input, 24u);
  for (const auto* st : {&rep.ingest, &rep.admission, &rep.synthesis}) {
    EXPECT_EQ(st->admitted + st->rejected, st->input);
  }
  EXPECT_EQ(rep.admission.input, rep.ingest.admitted);
  EXPECT_EQ(rep.synthesis.input, rep.admission.admitted);
  EXPECT_EQ(rep.records(), r.lines.size());
  EXPECT_EQ(rep.skipped.size(), rep.ingest.rejected + rep.admission.rejected + rep.synthesis.rejected);
  EXPECT_GT(rep.admission.rejected, 0u);
  std::size_t by_views = 0;
  for (const auto& [size, count] : rep.view_counts) by_views += count;
  EXPECT_EQ(by_views, rep.records());
  const auto j = json::parse(rep.to_json());
  EXPECT_EQ(j.at("records"), rep.records());
}

TEST(Pipeline, DeterministicAcrossWorkerCounts) {
  const auto m = synthetic("workers", {.scenes = 30, .single_object_every = 7, .multi_view_every = 4});
  PipelineConfig cfg;
  cfg.seed = 77;
  cfg.order_mode = OrderMode::random;
  cfg.workers = 1;
  const auto a = run_synthesis(m, cfg);
  cfg.workers = 8;
  const auto b = run_synthesis(m, cfg);
  EXPECT_EQ(joined(a), joined(b));
  EXPECT_EQ(a.report.to_json(), b.report.to_json());
  cfg.seed = 78;
  EXPECT_NE(joined(run_synthesis(m, cfg)), joined(a));
}

TEST(Pipeline, WriteRunProducesCorpusAndReport) {
  const auto m = synthetic("write", {.scenes = 3});
  const auto r = run_synthesis(m, PipelineConfig{});
  const auto out = scratch("write_out") / "corpus.jsonl";
  write_run(r, out);
  std::ifstream in(out);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) EXPECT_EQ(line, r.lines[n++]);
  EXPECT_EQ(n, 3u);
  EXPECT_TRUE(fs::exists(out.string() + ".report.json"));
  EXPECT_THROW(write_run(r, "/nonexistent-dir/x/corpus.jsonl"), IoError);
}

TEST(Records, EmitParseRoundTrip) {
  const auto conv = sample_conversation();
  const auto line = emit_record(conv, 4);
  const auto back = parse_record(line);
  EXPECT_EQ(back.view_count, 4u);
  EXPECT_EQ(back.conversation.id, conv.id);
  EXPECT_EQ(back.conversation.image_refs, conv.image_refs);
  ASSERT_EQ(back.conversation.turns.size(), 12u);
  for (std::size_t i = 0; i < 12; ++i) {
    EXPECT_EQ(back.conversation.turns[i].question, conv.turns[i].question);
    EXPECT_EQ(back.conversation.turns[i].answer, conv.turns[i].answer);
    EXPECT_EQ(back.conversation.turns[i].level, conv.turns[i].level);
  }
  EXPECT_EQ(emit_record(back), line);
}

TEST(Records, MalformedConversationsRefused) {
  auto conv = sample_conversation();
  conv.turns.pop_back();
  EXPECT_THROW(emit_record(conv), EmissionError);
  conv = sample_conversation();
  conv.turns.push_back(conv.turns.back());
  EXPECT_THROW(emit_record(conv), EmissionError);
  conv = sample_conversation();
  conv.turns[3].answer.clear();
  EXPECT_THROW(emit_record(conv), EmissionError);
}

TEST(Records, StrictParsing) {
  const auto line = emit_record(sample_conversation());
  EXPECT_THROW(parse_record("not json"), ConfigurationError);
  auto j = json::parse(line);
  j["extra"] = 1;
  EXPECT_THROW(parse_record(j.dump()), ConfigurationError);
  j = json::parse(line);
  j["conversations"][0]["from"] = "gpt";
  EXPECT_THROW(parse_record(j.dump()), ConfigurationError);
}

TEST(Config, DefaultsUnknownKeysAndValidation) {
  const auto c = PipelineConfig::from_json("{}");
  EXPECT_EQ(c.seed, 0u);
  EXPECT_EQ(c.single_point_turns, 3u);
  EXPECT_THROW(PipelineConfig::from_json(R"({"sed": 1})"), ConfigurationError);
  EXPECT_THROW(PipelineConfig::from_json(R"({"band": {"lo": 0.1, "mid": 0.2}})"), ConfigurationError);
  EXPECT_THROW(PipelineConfig::from_json(R"({"pixel_mix": {"single_point": 4}})").validate(), ConfigurationError);
  EXPECT_THROW(PipelineConfig::from_json(R"({"band": {"lo": 0.7, "hi": 0.2}})").validate(), ConfigurationError);
  EXPECT_THROW(PipelineConfig::from_json(R"({"view_mix": {"2": 0.5, "4": 0.1, "8": 0.1}})").validate(),
               ConfigurationError);
  EXPECT_THROW(PipelineConfig::from_json(R"({"units": "furlongs"})"), ConfigurationError);
  EXPECT_THROW(PipelineConfig::from_json("[1"), ConfigurationError);
  const auto round = PipelineConfig::from_json(PipelineConfig::from_json(R"({"seed": 5, "order_mode": "reverse"})").to_json());
  EXPECT_EQ(round.seed, 5u);
  EXPECT_EQ(round.order_mode, OrderMode::reverse);
}

TEST(Config, EnvironmentOverridesEndpoints) {
  ::setenv("SPATIALCOT_CAPTION_ENDPOINT", "http://127.0.0.1:9", 1);
  PipelineConfig c;
  c.apply_env();
  ::unsetenv("SPATIALCOT_CAPTION_ENDPOINT");
  EXPECT_EQ(c.caption_client.kind, "http");
  EXPECT_EQ(c.caption_client.endpoint, "http://127.0.0.1:9");
  EXPECT_EQ(c.validator_client.kind, "stub");
}

TEST(Clients, HttpCaptionAndValidator) {
  FakeServices services;
  auto caption = make_caption_client({"http", services.endpoint()});
  CaptionRequest req;
  req.conversation_id = "conv-1";
  req.descriptions = {"mug"};
  req.cubes = {BoundingCube{1, {0, 0, 1}, {1, 1, 2}}};
  const auto caps = caption->captions(req);
  EXPECT_EQ(caps[0], "remote conv-1");
  EXPECT_EQ(caps[1], "second");

  auto validator = make_validator_client({"http", services.endpoint()}, {});
  EXPECT_TRUE(validator->validate({"q", "a", {"f0", "f9", "f3"}}));
  EXPECT_FALSE(validator->validate({"q", "a", {"f0"}}));
  EXPECT_EQ(services.validations.load(), 2);
}

TEST(Clients, UnreachableEndpointIsServiceError) {
  auto caption = make_caption_client({"http", "http://127.0.0.1:1"});
  CaptionRequest req;
  req.conversation_id = "c";
  req.descriptions = {"mug"};
  req.cubes = {BoundingCube{1, {0, 0, 1}, {1, 1, 2}}};
  EXPECT_THROW(caption->captions(req), ServiceError);
  EXPECT_THROW(make_caption_client({"carrier-pigeon", ""}), ConfigurationError);
}

TEST(Clients, PipelineUsesHttpServices) {
  FakeServices services;
  const auto m = synthetic("http", {.scenes = 4, .multi_view_every = 2});
  PipelineConfig cfg;
  cfg.caption_client = {"http", services.endpoint()};
  cfg.validator_client = {"http", services.endpoint()};
  cfg.view_mix = {0.0, 1.0, 0.0};
  const auto r = run_synthesis(m, cfg);
  ASSERT_EQ(r.lines.size(), 4u);
  for (const auto& line : r.lines) {
    const auto j = json::parse(line);
    EXPECT_EQ(j["conversations"][21]["value"].get<std::string>().rfind("remote ", 0), 0u);
  }
  EXPECT_GT(services.validations.load(), 0);
  EXPECT_EQ(r.report.view_counts.at(4), 2u);
}

TEST(Manifest, RoundTripAndUnknownKeys) {
  const auto m = synthetic("manifest", {.scenes = 2, .multi_view_every = 2});
  const auto again = Manifest::from_json(m.to_json(), m.root);
  EXPECT_EQ(again.to_json(), m.to_json());
  EXPECT_THROW(Manifest::from_json(R"({"scenes": [], "extra": 1})", "."), ConfigurationError);
  EXPECT_THROW(Manifest::from_file("/nonexistent/manifest.json"), IoError);
}

TEST(Pipeline, MissingInputFileSkipsSceneAtIngest) {
  auto m = synthetic("missing", {.scenes = 3});
  m.scenes[1].views[0].depth = "does/not/exist.png";
  const auto r = run_synthesis(m, PipelineConfig{});
  EXPECT_EQ(r.lines.size(), 2u);
  ASSERT_EQ(r.report.skipped.size(), 1u);
  EXPECT_EQ(r.report.skipped[0].stage, "ingest");
}

TEST(Pipeline, RealizedViewMixTracksTargets) {
  const auto m = synthetic("viewmix", {.scenes = 3000, .seed = 4, .multi_view_every = 1, .width = 16, .height = 16});
  PipelineConfig cfg;
  cfg.seed = 12;
  cfg.validator_client = {"always_true", ""};
  cfg.workers = 4;
  const auto r = run_synthesis(m, cfg);
  const double total = static_cast<double>(r.report.records());
  ASSERT_GT(total, 2900);
  const auto share = [&](std::size_t size) {
    auto it = r.report.view_counts.find(size);
    return it == r.report.view_counts.end() ? 0.0 : static_cast<double>(it->second) / total;
  };
  EXPECT_NEAR(share(2), cfg.view_mix.two, 0.02);
  EXPECT_NEAR(share(4), cfg.view_mix.four, 0.02);
  EXPECT_NEAR(share(8), cfg.view_mix.eight, 0.02);
  EXPECT_EQ(r.report.validator_failures, 0u);
}
