#include <fstream>

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "tidyplan/session.hpp"

namespace tidy {
namespace {

using testing::box;
using testing::scene_of;

Scene two_cups() { return scene_of({box(1, 0.3, 0.3), box(2, 0.6, 0.4, 15.0)}); }

EditEvent ev(EditOp op, int id, double t = 0.0) { return {op, id, t}; }

// Select object 1, four moves in each direction except left, then three
// rotations with a reselect in between.
std::vector<EditEvent> scripted_events() {
  std::vector<EditEvent> out{ev(EditOp::select, 1)};
  for (auto op : {EditOp::move_up, EditOp::move_right, EditOp::move_down}) {
    for (int i = 0; i < 4; ++i) out.push_back(ev(op, 1, static_cast<double>(out.size())));
  }
  out.push_back(ev(EditOp::select, 2));
  out.push_back(ev(EditOp::rotate_ccw, 2));
  out.push_back(ev(EditOp::rotate_ccw, 2));
  out.push_back(ev(EditOp::rotate_cw, 2));
  return out;
}

TEST(EditOp, NamesRoundTrip) {
  for (auto op : {EditOp::move_up, EditOp::move_down, EditOp::move_left, EditOp::move_right,
                  EditOp::rotate_cw, EditOp::rotate_ccw, EditOp::select}) {
    EXPECT_EQ(parse_edit_op(to_string(op)), op);
  }
  try {
    parse_edit_op("jump");
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "unknown op: jump");
  }
}

TEST(RecountSession, TwelveMovesThreeRotations) {
  EditSessionLog log;
  log.events = scripted_events();
  const SessionTotals t = recount_session(log);
  EXPECT_DOUBLE_EQ(t.distance_cm, 12.0);
  EXPECT_DOUBLE_EQ(t.rotation_deg, 30.0);
  EXPECT_EQ(t.op_count, 15);
  EXPECT_EQ(recount_session(EditSessionLog{}), SessionTotals{});
}

TEST(RecountSession, UnselectedEditNamesEventIndex) {
  EditSessionLog log;
  log.events = {ev(EditOp::select, 1), ev(EditOp::move_up, 1), ev(EditOp::move_up, 2)};
  try {
    recount_session(log);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "malformed event 2: object not selected");
  }
}

TEST(ReplaySession, AppliesSteps) {
  EditSessionLog log;
  log.events = scripted_events();
  const Scene out = replay_session(two_cups(), log);
  EXPECT_NEAR(out.object(1).pose.x, 0.34, 1e-12);
  EXPECT_NEAR(out.object(1).pose.y, 0.30, 1e-12);
  EXPECT_NEAR(out.object(2).pose.theta, 25.0, 1e-12);
  log.events.push_back(ev(EditOp::select, 9));
  try {
    replay_session(two_cups(), log);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "malformed event 17: unknown object");
  }
}

TEST(ReplaySession, RotationWraps) {
  EditState st{two_cups(), std::nullopt};
  apply_edit(st, ev(EditOp::select, 1));
  apply_edit(st, ev(EditOp::rotate_cw, 1));
  EXPECT_DOUBLE_EQ(st.scene.object(1).pose.theta, 350.0);
  EXPECT_THROW(apply_edit(st, ev(EditOp::move_left, 2)), Error);
}

TEST(SessionLog, JsonRoundTrip) {
  EditSessionLog log;
  log.session_id = "s";
  log.scene_id = "desk";
  log.participant = "p1";
  log.events = scripted_events();
  log.final_scene = two_cups();
  log.tlx = TlxResponse{3, 4, 5};
  const EditSessionLog back = session_log_from_json(to_json(log));
  EXPECT_EQ(back.events, log.events);
  EXPECT_EQ(back.tlx, log.tlx);
  EXPECT_EQ(to_json(back).dump(), to_json(log).dump());
  EXPECT_THROW(session_log_from_json(Json{{"events", 1}}), Error);
}

TEST(Tlx, Range) {
  EXPECT_NO_THROW((TlxResponse{0, 20, 10}.validate()));
  EXPECT_THROW((TlxResponse{21, 0, 0}.validate()), Error);
  EXPECT_THROW((TlxResponse{0, -1, 0}.validate()), Error);
}

class SessionStoreTest : public ::testing::Test {
 protected:
  testing::TempDir dir{"store"};
  std::filesystem::path path() const { return dir.path() / "sessions.ndjson"; }
  std::map<std::string, Scene> scenes() const { return {{"desk", two_cups()}}; }
};

TEST_F(SessionStoreTest, LiveTotalsMatchRecount) {
  SessionStore store(scenes(), path());
  const std::string id = store.create("desk", "p1");
  for (const auto& e : scripted_events()) store.post_event(id, e);
  const SessionTotals t = store.metrics(id);
  EXPECT_EQ(t, recount_session(store.log(id)));
  EXPECT_EQ(t.op_count, 15);
  const SessionTotals done = store.finish(id, {5, 6, 7});
  EXPECT_EQ(done, t);
  EXPECT_TRUE(store.finished(id));
  const EditSessionLog log = store.log(id);
  ASSERT_TRUE(log.final_scene.has_value());
  EXPECT_EQ(Json(*log.final_scene).dump(), Json(replay_session(two_cups(), log)).dump());
}

TEST_F(SessionStoreTest, ErrorKinds) {
  SessionStore store(scenes(), path());
  const auto kind_of = [](auto&& f) {
    try {
      f();
    } catch (const SessionError& e) {
      return e.kind();
    }
    ADD_FAILURE() << "no error";
    return SessionError::Kind::invalid;
  };
  EXPECT_EQ(kind_of([&] { store.create("kitchen", ""); }), SessionError::Kind::not_found);
  EXPECT_EQ(kind_of([&] { store.metrics("session-999999"); }), SessionError::Kind::not_found);
  const std::string id = store.create("desk", "");
  EXPECT_EQ(kind_of([&] { store.post_event(id, ev(EditOp::move_up, 1)); }),
            SessionError::Kind::invalid);
  EXPECT_EQ(kind_of([&] { store.finish(id, {30, 0, 0}); }), SessionError::Kind::invalid);
  store.finish(id, {1, 1, 1});
  EXPECT_EQ(kind_of([&] { store.finish(id, {1, 1, 1}); }), SessionError::Kind::conflict);
  EXPECT_EQ(kind_of([&] { store.post_event(id, ev(EditOp::select, 1)); }),
            SessionError::Kind::conflict);
  // Rejected events leave no trace.
  EXPECT_EQ(store.log(id).events.size(), 0u);
}

TEST_F(SessionStoreTest, RestartReplaysAndTruncatesTornLine) {
  std::string id;
  SessionTotals before;
  {
    SessionStore store(scenes(), path());
    id = store.create("desk", "p2");
    for (const auto& e : scripted_events()) store.post_event(id, e);
    before = store.metrics(id);
  }
  const auto intact = std::filesystem::file_size(path());
  {
    std::ofstream out(path(), std::ios::app | std::ios::binary);
    out << R"({"type":"event","session_id":")" << id << R"(","event":{"op":"mo)";
  }
  SessionStore again(scenes(), path());
  EXPECT_EQ(std::filesystem::file_size(path()), intact);
  EXPECT_EQ(again.session_count(), 1u);
  EXPECT_EQ(again.metrics(id), before);
  EXPECT_EQ(again.log(id).events, scripted_events());
  // New sessions continue the numbering rather than reusing ids.
  EXPECT_NE(again.create("desk", ""), id);
  again.post_event(id, ev(EditOp::move_left, 2));
  SessionStore third(scenes(), path());
  EXPECT_EQ(third.metrics(id).op_count, before.op_count + 1);
  EXPECT_EQ(third.session_count(), 2u);
}

TEST_F(SessionStoreTest, CorruptMiddleLineIsReported) {
  {
    std::ofstream out(path());
    out << "{not json}\n";
  }
  EXPECT_THROW(SessionStore(scenes(), path()), Error);
}

TEST(LoadSceneSet, ReadsJsonFilesByStem) {
  testing::TempDir dir("scenes");
  write_json_file(dir.path() / "desk.json", Json(two_cups()));
  { std::ofstream(dir.path() / "notes.txt") << "ignored"; }
  const auto set = load_scene_set(dir.path());
  ASSERT_EQ(set.size(), 1u);
  EXPECT_EQ(set.begin()->first, "desk");
  EXPECT_THROW(load_scene_set(dir.path() / "missing"), Error);
}

}  // namespace
}  // namespace tidy
