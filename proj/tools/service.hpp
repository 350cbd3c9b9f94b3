#pragma once

#include <string>

#include "tidyplan/session.hpp"

namespace httplib {
class Server;
}

namespace tidy {

/// Mounts the session API on a server. The store must outlive the server.
///   GET  /api/scenes                 ids with their scenes
///   GET  /api/scene/{id}
///   POST /api/session                {scene_id, participant?} -> {session_id}
///   POST /api/session/{id}/event     {op, object_id, timestamp?}
///   POST /api/session/{id}/finish    {mental_demand, performance, frustration}
///   GET  /api/session/{id}/metrics
/// Unknown ids answer 404, ill-formed bodies 422, a second finish 409.
void mount_session_api(httplib::Server& server, SessionStore& store);

/// Blocks serving until the process is stopped.
int serve_sessions(const std::string& host, int port, SessionStore& store);

}  // namespace tidy
