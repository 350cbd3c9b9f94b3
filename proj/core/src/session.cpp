#include "tidyplan/session.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace tidy {

namespace {

constexpr std::array<std::pair<EditOp, std::string_view>, 7> kOpNames = {{
    {EditOp::move_up, "move-up"},
    {EditOp::move_down, "move-down"},
    {EditOp::move_left, "move-left"},
    {EditOp::move_right, "move-right"},
    {EditOp::rotate_cw, "rotate-cw"},
    {EditOp::rotate_ccw, "rotate-ccw"},
    {EditOp::select, "select"},
}};

bool is_move(EditOp op) {
  return op == EditOp::move_up || op == EditOp::move_down || op == EditOp::move_left ||
         op == EditOp::move_right;
}

bool is_rotation(EditOp op) { return op == EditOp::rotate_cw || op == EditOp::rotate_ccw; }

void count(SessionTotals& t, EditOp op) {
  if (is_move(op)) {
    t.distance_cm += kMoveStepM * 100.0;
    t.op_count += 1;
  } else if (is_rotation(op)) {
    t.rotation_deg += kRotateStepDeg;
    t.op_count += 1;
  }
}

}  // namespace

std::string_view to_string(EditOp op) {
  for (const auto& [k, name] : kOpNames) {
    if (k == op) return name;
  }
  return "select";
}

EditOp parse_edit_op(std::string_view name) {
  for (const auto& [k, n] : kOpNames) {
    if (n == name) return k;
  }
  throw Error("unknown op: " + std::string(name));
}

void TlxResponse::validate() const {
  for (const int v : {mental_demand, performance, frustration}) {
    if (v < 0 || v > 20) throw Error("tlx responses must be integers in [0, 20]");
  }
}

void to_json(Json& j, const EditEvent& e) {
  j = Json{{"op", std::string(to_string(e.op))}, {"object_id", e.object_id},
           {"timestamp", e.timestamp}};
}

void from_json(const Json& j, EditEvent& e) {
  if (!j.is_object()) throw Error("event must be an object");
  if (!j.contains("op") || !j["op"].is_string()) throw Error("event needs a string op");
  if (!j.contains("object_id") || !j["object_id"].is_number_integer()) {
    throw Error("event needs an integer object_id");
  }
  e.op = parse_edit_op(j["op"].get<std::string>());
  e.object_id = j["object_id"].get<int>();
  e.timestamp = 0.0;
  if (j.contains("timestamp")) {
    if (!j["timestamp"].is_number()) throw Error("timestamp must be a number");
    e.timestamp = j["timestamp"].get<double>();
  }
}

void to_json(Json& j, const TlxResponse& t) {
  j = Json{{"mental_demand", t.mental_demand},
           {"performance", t.performance},
           {"frustration", t.frustration}};
}

void from_json(const Json& j, TlxResponse& t) {
  if (!j.is_object()) throw Error("tlx payload must be an object");
  const auto field = [&](const char* name) {
    if (!j.contains(name) || !j[name].is_number_integer()) {
      throw Error(std::string("tlx field ") + name + " must be an integer");
    }
    return j[name].get<int>();
  };
  t.mental_demand = field("mental_demand");
  t.performance = field("performance");
  t.frustration = field("frustration");
  t.validate();
}

void to_json(Json& j, const SessionTotals& t) {
  j = Json{{"distance_cm", t.distance_cm},
           {"rotation_deg", t.rotation_deg},
           {"op_count", t.op_count}};
}

Json to_json(const EditSessionLog& log) {
  Json j{{"session_id", log.session_id},
         {"scene_id", log.scene_id},
         {"participant", log.participant},
         {"events", log.events}};
  if (log.final_scene) j["final_scene"] = *log.final_scene;
  if (log.tlx) j["tlx"] = *log.tlx;
  return j;
}

EditSessionLog session_log_from_json(const Json& j) {
  try {
    EditSessionLog log;
    log.session_id = j.at("session_id").get<std::string>();
    log.scene_id = j.at("scene_id").get<std::string>();
    log.participant = j.value("participant", std::string{});
    for (const auto& e : j.at("events")) log.events.push_back(e.get<EditEvent>());
    if (j.contains("final_scene")) log.final_scene = j["final_scene"].get<Scene>();
    if (j.contains("tlx")) log.tlx = j["tlx"].get<TlxResponse>();
    return log;
  } catch (const Json::exception& e) {
    throw Error(std::string("malformed session log: ") + e.what());
  }
}

void apply_edit(EditState& state, const EditEvent& event) {
  if (!state.scene.has_object(event.object_id)) throw Error("unknown object");
  if (event.op == EditOp::select) {
    state.selected = event.object_id;
    return;
  }
  if (state.selected != event.object_id) throw Error("object not selected");
  Pose& p = state.scene.object(event.object_id).pose;
  switch (event.op) {
    case EditOp::move_up: p.y += kMoveStepM; break;
    case EditOp::move_down: p.y -= kMoveStepM; break;
    case EditOp::move_left: p.x -= kMoveStepM; break;
    case EditOp::move_right: p.x += kMoveStepM; break;
    case EditOp::rotate_ccw: p.theta = wrap_degrees(p.theta + kRotateStepDeg); break;
    case EditOp::rotate_cw: p.theta = wrap_degrees(p.theta - kRotateStepDeg); break;
    case EditOp::select: break;
  }
  if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.theta)) {
    throw Error("non-finite pose");
  }
}

Scene replay_session(const Scene& initial, const EditSessionLog& log) {
  EditState state{initial, std::nullopt};
  for (std::size_t i = 0; i < log.events.size(); ++i) {
    try {
      apply_edit(state, log.events[i]);
    } catch (const Error& e) {
      throw Error("malformed event " + std::to_string(i) + ": " + e.what());
    }
  }
  return state.scene;
}

SessionTotals recount_session(const EditSessionLog& log) {
  SessionTotals totals;
  std::optional<int> selected;
  for (std::size_t i = 0; i < log.events.size(); ++i) {
    const EditEvent& e = log.events[i];
    if (e.op == EditOp::select) {
      selected = e.object_id;
      continue;
    }
    if (selected != e.object_id) {
      throw Error("malformed event " + std::to_string(i) + ": object not selected");
    }
    count(totals, e.op);
  }
  return totals;
}

std::map<std::string, Scene> load_scene_set(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error("scene directory not found: " + dir.string());
  std::map<std::string, Scene> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".json") continue;
    out.emplace(entry.path().stem().string(), load_scene(entry.path()));
  }
  if (out.empty()) throw Error("no scenes in " + dir.string());
  return out;
}

SessionStore::SessionStore(std::map<std::string, Scene> scenes, std::filesystem::path store_path)
    : scenes_(std::move(scenes)), path_(std::move(store_path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  replay();
}

const Scene& SessionStore::scene(const std::string& id) const {
  const auto it = scenes_.find(id);
  if (it == scenes_.end()) throw SessionError(SessionError::Kind::not_found, "unknown scene");
  return it->second;
}

void SessionStore::append(const Json& record) {
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  if (!out) throw Error("cannot open session store: " + path_.string());
  out << record.dump() << '\n';
  out.flush();
  if (!out) throw Error("cannot write session store: " + path_.string());
}

void SessionStore::replay() {
  if (!std::filesystem::exists(path_)) return;
  std::ifstream in(path_, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string content = buf.str();
  const std::size_t complete = content.rfind('\n') == std::string::npos ? 0 : content.rfind('\n') + 1;
  if (complete < content.size()) {
    // Torn write from a crash: drop the partial record.
    in.close();
    std::filesystem::resize_file(path_, complete);
  }
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < complete) {
    const std::size_t end = content.find('\n', start);
    const std::string line = content.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.empty()) continue;
    try {
      apply_record(Json::parse(line));
    } catch (const std::exception& e) {
      throw Error("corrupt session store at line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void SessionStore::apply_record(const Json& r) {
  const std::string type = r.at("type").get<std::string>();
  const std::string id = r.at("session_id").get<std::string>();
  if (type == "create") {
    Live l;
    l.log.session_id = id;
    l.log.scene_id = r.at("scene_id").get<std::string>();
    l.log.participant = r.value("participant", std::string{});
    l.state.scene = scene(l.log.scene_id);
    sessions_[id] = std::move(l);
    ++next_id_;
  } else if (type == "event") {
    Live& l = live(id);
    const EditEvent e = r.at("event").get<EditEvent>();
    apply_edit(l.state, e);
    l.log.events.push_back(e);
    count(l.totals, e.op);
  } else if (type == "finish") {
    Live& l = live(id);
    l.log.tlx = r.at("tlx").get<TlxResponse>();
    l.log.final_scene = l.state.scene;
    l.finished = true;
  } else {
    throw Error("unknown record type " + type);
  }
}

SessionStore::Live& SessionStore::live(const std::string& id) {
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw SessionError(SessionError::Kind::not_found, "unknown session");
  return it->second;
}

const SessionStore::Live& SessionStore::live(const std::string& id) const {
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw SessionError(SessionError::Kind::not_found, "unknown session");
  return it->second;
}

std::string SessionStore::create(const std::string& scene_id, const std::string& participant) {
  std::lock_guard lock(mutex_);
  scene(scene_id);
  char buf[32];
  std::snprintf(buf, sizeof buf, "session-%06zu", next_id_);
  const std::string id = buf;
  const Json record{{"type", "create"},
                    {"session_id", id},
                    {"scene_id", scene_id},
                    {"participant", participant}};
  append(record);
  apply_record(record);
  return id;
}

SessionStore::EventReply SessionStore::post_event(const std::string& session_id,
                                                  const EditEvent& event) {
  std::lock_guard lock(mutex_);
  Live& l = live(session_id);
  if (l.finished) throw SessionError(SessionError::Kind::conflict, "session already finished");
  EditState probe = l.state;
  try {
    apply_edit(probe, event);
  } catch (const Error& e) {
    throw SessionError(SessionError::Kind::invalid, e.what());
  }
  append({{"type", "event"}, {"session_id", session_id}, {"event", event}});
  l.state = std::move(probe);
  l.log.events.push_back(event);
  count(l.totals, event.op);
  return {l.state.scene, l.totals, l.state.selected};
}

SessionTotals SessionStore::finish(const std::string& session_id, const TlxResponse& tlx) {
  std::lock_guard lock(mutex_);
  Live& l = live(session_id);
  if (l.finished) throw SessionError(SessionError::Kind::conflict, "session already finished");
  try {
    tlx.validate();
  } catch (const Error& e) {
    throw SessionError(SessionError::Kind::invalid, e.what());
  }
  append({{"type", "finish"}, {"session_id", session_id}, {"tlx", tlx}});
  l.log.tlx = tlx;
  l.log.final_scene = l.state.scene;
  l.finished = true;
  return l.totals;
}

SessionTotals SessionStore::metrics(const std::string& session_id) const {
  std::lock_guard lock(mutex_);
  return live(session_id).totals;
}

bool SessionStore::finished(const std::string& session_id) const {
  std::lock_guard lock(mutex_);
  return live(session_id).finished;
}

EditSessionLog SessionStore::log(const std::string& session_id) const {
  std::lock_guard lock(mutex_);
  return live(session_id).log;
}

std::size_t SessionStore::session_count() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

}  // namespace tidy
