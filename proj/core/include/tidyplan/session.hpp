#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tidyplan/serialization.hpp"
#include "tidyplan/world.hpp"

namespace tidy {

enum class EditOp { move_up, move_down, move_left, move_right, rotate_cw, rotate_ccw, select };

std::string_view to_string(EditOp op);
/// Throws "unknown op: <name>".
EditOp parse_edit_op(std::string_view name);

/// Keyboard step sizes of the manual editing protocol.
inline constexpr double kMoveStepM = 0.01;
inline constexpr double kRotateStepDeg = 10.0;

struct EditEvent {
  EditOp op = EditOp::select;
  int object_id = 0;
  double timestamp = 0.0;

  friend bool operator==(const EditEvent&, const EditEvent&) = default;
};

/// NASA-TLX subscales kept by the protocol, each an integer in [0, 20].
struct TlxResponse {
  int mental_demand = 0;
  int performance = 0;
  int frustration = 0;

  friend bool operator==(const TlxResponse&, const TlxResponse&) = default;
  void validate() const;
};

struct EditSessionLog {
  std::string session_id;
  std::string scene_id;
  std::string participant;
  std::vector<EditEvent> events;
  std::optional<Scene> final_scene;
  std::optional<TlxResponse> tlx;
};

struct SessionTotals {
  double distance_cm = 0.0;
  double rotation_deg = 0.0;
  int op_count = 0;

  friend bool operator==(const SessionTotals&, const SessionTotals&) = default;
};

void to_json(Json& j, const EditEvent& e);
void from_json(const Json& j, EditEvent& e);
void to_json(Json& j, const TlxResponse& t);
void from_json(const Json& j, TlxResponse& t);
void to_json(Json& j, const SessionTotals& t);
Json to_json(const EditSessionLog& log);
EditSessionLog session_log_from_json(const Json& j);

/// Editing cursor: the scene plus the currently selected object.
struct EditState {
  Scene scene;
  std::optional<int> selected;
};

/// Applies one event. Moves shift by 1 cm along the table axes (up = +y,
/// right = +x); rotate-ccw adds 10 degrees, rotate-cw subtracts them.
/// Throws "unknown object" or "object not selected".
void apply_edit(EditState& state, const EditEvent& event);

/// Replays a whole log from the initial scene. Errors carry the event index.
Scene replay_session(const Scene& initial, const EditSessionLog& log);

/// Totals from the log alone: 1 cm per move, 10 degrees per rotation, one
/// operation per move or rotation (selection is a pointer action, not a
/// keyboard operation). Throws "malformed event <i>: <reason>" when an edit
/// targets an object other than the current selection.
SessionTotals recount_session(const EditSessionLog& log);

/// Thrown by SessionStore; the code maps onto an HTTP status.
class SessionError : public Error {
 public:
  enum class Kind { not_found, invalid, conflict };
  SessionError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Sessions backed by an append-only newline-delimited JSON file. Every
/// create/event/finish is written and flushed before it is acknowledged;
/// opening an existing file replays it (a torn final line is ignored).
class SessionStore {
 public:
  SessionStore(std::map<std::string, Scene> scenes, std::filesystem::path store_path);

  const std::map<std::string, Scene>& scenes() const { return scenes_; }
  const Scene& scene(const std::string& id) const;

  std::string create(const std::string& scene_id, const std::string& participant);
  struct EventReply {
    Scene scene;
    SessionTotals totals;
    std::optional<int> selected;
  };
  EventReply post_event(const std::string& session_id, const EditEvent& event);
  SessionTotals finish(const std::string& session_id, const TlxResponse& tlx);
  SessionTotals metrics(const std::string& session_id) const;
  bool finished(const std::string& session_id) const;
  EditSessionLog log(const std::string& session_id) const;
  std::size_t session_count() const;

 private:
  struct Live {
    EditSessionLog log;
    EditState state;
    SessionTotals totals;
    bool finished = false;
  };

  void append(const Json& record);
  void replay();
  Live& live(const std::string& id);
  const Live& live(const std::string& id) const;
  void apply_record(const Json& record);

  std::map<std::string, Scene> scenes_;
  std::filesystem::path path_;
  std::map<std::string, Live> sessions_;
  std::size_t next_id_ = 1;
  mutable std::mutex mutex_;
};

/// Loads every *.json scene in a directory keyed by file stem.
std::map<std::string, Scene> load_scene_set(const std::filesystem::path& dir);

}  // namespace tidy
