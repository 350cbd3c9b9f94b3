#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "service.hpp"
#include "test_support.hpp"

namespace tidy {
namespace {

using testing::box;
using testing::scene_of;

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    store_ = std::make_unique<SessionStore>(
        std::map<std::string, Scene>{{"desk", scene_of({box(1, 0.3, 0.3), box(2, 0.6, 0.4)})}},
        dir_.path() / "sessions.ndjson");
    mount_session_api(server_, *store_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }

  void TearDown() override {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  httplib::Result post(const std::string& path, const Json& body) {
    return client_->Post(path, body.dump(), "application/json");
  }

  std::string new_session() {
    auto r = post("/api/session", {{"scene_id", "desk"}, {"participant", "p"}});
    EXPECT_EQ(r->status, 201);
    return Json::parse(r->body).at("session_id").get<std::string>();
  }

  testing::TempDir dir_{"service"};
  std::unique_ptr<SessionStore> store_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::unique_ptr<httplib::Client> client_;
};

TEST_F(ServiceTest, ScenesListing) {
  auto r = client_->Get("/api/scenes");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  const Json body = Json::parse(r->body);
  ASSERT_EQ(body.size(), 1u);
  EXPECT_EQ(body[0]["id"], "desk");
  EXPECT_EQ(client_->Get("/api/scene/desk")->status, 200);
  EXPECT_EQ(client_->Get("/api/scene/attic")->status, 404);
}

TEST_F(ServiceTest, EditSessionRoundTrip) {
  const std::string id = new_session();
  const std::string base = "/api/session/" + id;
  ASSERT_EQ(post(base + "/event", {{"op", "select"}, {"object_id", 1}})->status, 200);
  for (const char* op : {"move-up", "move-right", "move-down"}) {
    for (int i = 0; i < 4; ++i) {
      auto r = post(base + "/event", {{"op", op}, {"object_id", 1}, {"timestamp", 1.5}});
      ASSERT_EQ(r->status, 200) << r->body;
    }
  }
  post(base + "/event", {{"op", "select"}, {"object_id", 2}});
  Json last;
  for (const char* op : {"rotate-ccw", "rotate-ccw", "rotate-cw"}) {
    auto r = post(base + "/event", {{"op", op}, {"object_id", 2}});
    ASSERT_EQ(r->status, 200);
    last = Json::parse(r->body);
  }
  EXPECT_EQ(last["selected"], 2);
  EXPECT_EQ(last["totals"]["op_count"], 15);

  auto m = client_->Get(base + "/metrics");
  ASSERT_EQ(m->status, 200);
  const Json metrics = Json::parse(m->body);
  EXPECT_DOUBLE_EQ(metrics["distance_cm"].get<double>(), 12.0);
  EXPECT_DOUBLE_EQ(metrics["rotation_deg"].get<double>(), 30.0);
  EXPECT_EQ(metrics["op_count"], 15);
  EXPECT_EQ(metrics["finished"], false);

  auto f = post(base + "/finish", {{"mental_demand", 4}, {"performance", 15}, {"frustration", 2}});
  ASSERT_EQ(f->status, 200);
  const SessionTotals recount = recount_session(store_->log(id));
  const Json fm = Json::parse(f->body)["metrics"];
  EXPECT_DOUBLE_EQ(fm["distance_cm"].get<double>(), recount.distance_cm);
  EXPECT_DOUBLE_EQ(fm["rotation_deg"].get<double>(), recount.rotation_deg);
  EXPECT_EQ(fm["op_count"], recount.op_count);
  EXPECT_EQ(Json::parse(client_->Get(base + "/metrics")->body)["finished"], true);
}

TEST_F(ServiceTest, ErrorStatuses) {
  EXPECT_EQ(post("/api/session", {{"scene_id", "attic"}})->status, 404);
  EXPECT_EQ(post("/api/session", {{"scene", "desk"}})->status, 422);
  EXPECT_EQ(client_->Post("/api/session", "{oops", "application/json")->status, 422);
  EXPECT_EQ(client_->Get("/api/session/session-424242/metrics")->status, 404);
  EXPECT_EQ(post("/api/session/session-424242/event", {{"op", "select"}, {"object_id", 1}})->status,
            404);

  const std::string id = new_session();
  const std::string base = "/api/session/" + id;
  EXPECT_EQ(post(base + "/event", {{"op", "teleport"}, {"object_id", 1}})->status, 422);
  EXPECT_EQ(post(base + "/event", {{"op", "select"}})->status, 422);
  EXPECT_EQ(post(base + "/event", {{"op", "move-up"}, {"object_id", 1}})->status, 422);
  EXPECT_EQ(post(base + "/event", {{"op", "select"}, {"object_id", 7}})->status, 422);
  EXPECT_EQ(post(base + "/finish", {{"mental_demand", 40}, {"performance", 1}, {"frustration", 1}})
                ->status,
            422);
  EXPECT_EQ(post(base + "/finish", {{"mental_demand", 1}})->status, 422);
  const Json tlx{{"mental_demand", 1}, {"performance", 1}, {"frustration", 1}};
  EXPECT_EQ(post(base + "/finish", tlx)->status, 200);
  EXPECT_EQ(post(base + "/finish", tlx)->status, 409);
  EXPECT_EQ(post(base + "/event", {{"op", "select"}, {"object_id", 1}})->status, 409);
  const Json err = Json::parse(post(base + "/finish", tlx)->body);
  EXPECT_TRUE(err.contains("error"));
  EXPECT_EQ(store_->log(id).events.size(), 0u);
}

}  // namespace
}  // namespace tidy
