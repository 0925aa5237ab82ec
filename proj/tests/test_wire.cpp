#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mbotsim/engine.hpp"
#include "mbotsim/wire.hpp"

using namespace mbotsim;

namespace {

std::vector<std::string> corpus_lines() {
  std::ifstream in(std::filesystem::path(MBOTSIM_SOURCE_DIR) / "docs" / "wire_corpus.jsonl");
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

ScenarioConfig two_robots() {
  ScenarioConfig cfg;
  cfg.name = "pair";
  cfg.world.segments.push_back({{-1, -1}, {1, -1}});
  RobotConfig a;
  a.name = "a";
  a.controller = ConstantTwistBinding{{0.1, 0.2}};
  RobotConfig b = a;
  b.name = "b";
  b.initial_pose = Pose2D(0.5, 0.5, 1.0);
  cfg.robots = {a, b};
  return cfg;
}

}  // namespace

TEST(Wire, CorpusRoundTrip) {
  const auto lines = corpus_lines();
  ASSERT_GE(lines.size(), 10u);
  std::set<FrameType> seen;
  for (const auto& line : lines) {
    const WireFrame f = decode_frame(line);
    EXPECT_EQ(encode_frame(f), line);
    EXPECT_EQ(decode_frame(encode_frame(f)), f);
    seen.insert(f.type);
  }
  EXPECT_EQ(seen.size(), 6u);  // every frame type is represented
}

TEST(Wire, CorpusFramesParse) {
  for (const auto& line : corpus_lines()) {
    const WireFrame f = decode_frame(line);
    if (f.type == FrameType::teleop) {
      EXPECT_NO_THROW(parse_teleop(f));
    } else if (f.type == FrameType::control) {
      EXPECT_NO_THROW(parse_control(f));
    }
  }
}

TEST(Wire, UnknownTypeAndMalformed) {
  try {
    decode_frame(R"({"type":"zap","seq":1,"body":{}})");
    FAIL();
  } catch (const DecodeError& e) {
    EXPECT_EQ(e.code(), "unknown_type");
    const auto reply = make_error_frame(1, e.code(), e.what());
    EXPECT_EQ(reply.body["code"], "unknown_type");
  }
  try {
    decode_frame(R"({"type":"teleop", "seq": 1,,})");
    FAIL();
  } catch (const DecodeError& e) {
    EXPECT_EQ(e.code(), "malformed");
    EXPECT_GT(e.offset(), 0u);
    EXPECT_LE(e.offset(), 30u);
  }
  EXPECT_THROW(decode_frame("[1,2]"), DecodeError);
  EXPECT_THROW(decode_frame(R"({"type":"state"})"), DecodeError);
  EXPECT_THROW(decode_frame(R"({"type":"state","seq":-1})"), DecodeError);
}

TEST(Wire, UnknownFieldsIgnored) {
  const auto f = decode_frame(R"({"type":"teleop","seq":9,"extra":[1],"body":{"robot":"r","v":0.1,"w":0,"x":1}})");
  const auto cmd = parse_teleop(f);
  EXPECT_EQ(cmd.robot, "r");
  EXPECT_EQ(cmd.v, 0.1);
}

TEST(Wire, TeleopAndControlValidation) {
  EXPECT_THROW(parse_teleop(decode_frame(R"({"type":"teleop","seq":1,"body":{"v":0.1,"w":0}})")), DecodeError);
  EXPECT_THROW(parse_teleop(decode_frame(R"({"type":"teleop","seq":1,"body":{"robot":"r","v":"fast","w":0}})")),
               DecodeError);
  EXPECT_THROW(parse_control(decode_frame(R"({"type":"control","seq":1,"body":{"pause":"yes"}})")), DecodeError);
  EXPECT_THROW(parse_control(decode_frame(R"({"type":"control","seq":1,"body":{"speed":-1}})")), DecodeError);
  const auto c = parse_control(decode_frame(R"({"type":"control","seq":1,"body":{"pause":true,"speed":0}})"));
  EXPECT_EQ(c.pause, true);
  EXPECT_EQ(c.speed, 0.0);
  EXPECT_FALSE(c.reset);
}

TEST(Wire, BuildersRoundTrip) {
  const ControlCommand c{true, true, 3.0, {"/a/reading_tof_array"}};
  const auto cf = make_control_frame(4, c);
  const auto back = parse_control(decode_frame(encode_frame(cf)));
  EXPECT_EQ(back.pause, c.pause);
  EXPECT_EQ(back.reset, c.reset);
  EXPECT_EQ(back.speed, c.speed);
  EXPECT_EQ(back.subscribe, c.subscribe);

  const TeleopCommand t{"leader", 0.2, -0.3, 1.5};
  const auto tb = parse_teleop(decode_frame(encode_frame(make_teleop_frame(2, t))));
  EXPECT_EQ(tb.robot, t.robot);
  EXPECT_EQ(tb.v, t.v);
  EXPECT_EQ(tb.w, t.w);
  EXPECT_EQ(tb.stamp, t.stamp);
}

TEST(Wire, StateFrameSchema) {
  Simulation sim(two_robots());
  sim.run(0.2);
  const auto f = make_state_frame(7, sim.snapshot(), false, 0);
  const auto& robots = f.body.at("robots");
  ASSERT_EQ(robots.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& r = robots[i];
    for (const char* key : {"name", "x", "y", "theta", "led", "tof", "line"}) {
      EXPECT_TRUE(r.contains(key)) << key;
    }
    EXPECT_EQ(r["tof"].size(), 8u);
    EXPECT_EQ(r["line"].size(), 2u);
    EXPECT_EQ(r["led"]["rgb"].size(), 3u);
    // Poses in the frame equal the engine's logged poses exactly.
    const auto logged = sim.log().for_robot(r["name"].get<std::string>()).back();
    EXPECT_EQ(r["x"].get<double>(), logged.x);
    EXPECT_EQ(r["y"].get<double>(), logged.y);
    EXPECT_EQ(r["theta"].get<double>(), logged.theta);
  }
  EXPECT_EQ(f.body["step"], 20);
  // Doubles survive the text encoding bit-for-bit.
  EXPECT_EQ(decode_frame(encode_frame(f)), f);
}

TEST(Wire, HelloFrameDescribesScenario) {
  const auto f = make_hello_frame(1, two_robots());
  EXPECT_EQ(f.body["scenario"], "pair");
  EXPECT_EQ(f.body["protocol"], kWireProtocolVersion);
  ASSERT_EQ(f.body["robots"].size(), 2u);
  EXPECT_EQ(f.body["robots"][0]["name"], "a");
  EXPECT_EQ(f.body["world"]["segments"].size(), 1u);
}

TEST(Wire, TopicFrameKinds) {
  const auto tw = make_topic_frame(1, {"/a/writing_dc_cmd_vel", 0.5, Twist2D{0.1, 0.2}});
  EXPECT_EQ(tw.body["kind"], "twist");
  EXPECT_EQ(tw.body["data"]["w"], 0.2);
  const auto arr = make_topic_frame(2, {"/a/reading_spi_adc", 0.5, FloatArray(8, 51.0f)});
  EXPECT_EQ(arr.body["data"].size(), 8u);
  const auto stub = make_topic_frame(3, {"/a/image_raw", 0.5, ByteStub{65536, 7}});
  EXPECT_EQ(stub.body["data"]["length"], 65536);
}
