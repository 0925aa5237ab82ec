#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>

#include "mbotsim/ws_server.hpp"

using namespace mbotsim;
namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;

namespace {

ScenarioConfig scenario(const char* file) {
  return load_scenario_file(std::filesystem::path(MBOTSIM_SOURCE_DIR) / "scenarios" / file);
}

class Client {
 public:
  explicit Client(unsigned short port) : ws_(ioc_) {
    net::ip::tcp::resolver resolver(ioc_);
    net::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
    ws_.handshake("127.0.0.1", "/");
    ws_.text(true);
  }

  WireFrame read() {
    beast::flat_buffer buf;
    ws_.read(buf);
    return decode_frame(beast::buffers_to_string(buf.data()));
  }

  WireFrame read_until(FrameType type) {
    for (int i = 0; i < 500; ++i) {
      auto f = read();
      if (f.type == type) return f;
    }
    throw std::runtime_error("frame type never arrived");
  }

  void send(const std::string& text) { ws_.write(net::buffer(text)); }

 private:
  net::io_context ioc_;
  websocket::stream<net::ip::tcp::socket> ws_;
};

}  // namespace

TEST(BridgeServer, HelloThenStateAndErrors) {
  LiveOptions opt;
  opt.speed = 4.0;
  opt.broadcast_hz = 30.0;
  LiveSession session(scenario("leader_follower.json"), opt);
  BridgeServer server(session, 0, "127.0.0.1");
  server.start();
  session.start();

  Client client(server.port());
  const auto hello = client.read();
  EXPECT_EQ(hello.type, FrameType::hello);
  EXPECT_EQ(hello.body["robots"].size(), 5u);

  const auto state = client.read_until(FrameType::state);
  EXPECT_EQ(state.body["robots"].size(), 5u);

  client.send(R"({"type":"zap","seq":1,"body":{}})");
  auto err = client.read_until(FrameType::error);
  EXPECT_EQ(err.body["code"], "unknown_type");

  client.send(R"({"type":"teleop",,)");
  err = client.read_until(FrameType::error);
  EXPECT_EQ(err.body["code"], "malformed");

  client.send(encode_frame(make_teleop_frame(5, {"leader", 0.2, 0.0, 0.0})));
  client.send(encode_frame(make_teleop_frame(5, {"leader", 0.2, 0.0, 0.0})));
  err = client.read_until(FrameType::error);
  EXPECT_EQ(err.body["code"], "seq_regression");

  server.stop();
  session.stop();
  EXPECT_GT(session.log().for_robot("leader").back().x, -10.0);
}

TEST(BridgeServer, TeleopMovesLeader) {
  LiveOptions opt;
  opt.speed = 4.0;
  LiveSession session(scenario("leader_follower.json"), opt);
  BridgeServer server(session, 0, "127.0.0.1");
  server.start();
  session.start();
  const double x0 = session.config().robots[0].initial_pose.x;

  Client client(server.port());
  client.read_until(FrameType::hello);
  for (std::uint64_t seq = 1; seq <= 20; ++seq) {
    client.send(encode_frame(make_teleop_frame(seq, {"leader", 0.3, 0.0, 0.0})));
    client.read_until(FrameType::state);
  }
  server.stop();
  session.stop();
  EXPECT_GT(session.log().for_robot("leader").back().x, x0 + 0.01);
}

TEST(BridgeServer, PortInUseThrows) {
  LiveSession session(scenario("go_to_goal.json"), LiveOptions{});
  BridgeServer first(session, 0, "127.0.0.1");
  EXPECT_THROW(BridgeServer(session, first.port(), "127.0.0.1"), boost::system::system_error);
}
