#include "service.hpp"

#include <iostream>

#include <httplib.h>

namespace tidy {

namespace {

void reply(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& reason) {
  reply(res, status, Json{{"error", reason}});
}

int status_of(SessionError::Kind k) {
  switch (k) {
    case SessionError::Kind::not_found: return 404;
    case SessionError::Kind::invalid: return 422;
    case SessionError::Kind::conflict: return 409;
  }
  return 500;
}

// Runs a handler and maps library errors onto status codes.
template <typename F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const SessionError& e) {
    reply_error(res, status_of(e.kind()), e.what());
  } catch (const Json::exception& e) {
    reply_error(res, 422, e.what());
  } catch (const Error& e) {
    reply_error(res, 422, e.what());
  }
}

Json parse_body(const httplib::Request& req) {
  Json body = Json::parse(req.body, nullptr, false);
  if (body.is_discarded()) throw SessionError(SessionError::Kind::invalid, "body is not JSON");
  return body;
}

Json totals_json(const SessionTotals& t) {
  Json j;
  to_json(j, t);
  return j;
}

}  // namespace

void mount_session_api(httplib::Server& server, SessionStore& store) {
  server.Get("/api/scenes", [&store](const httplib::Request&, httplib::Response& res) {
    Json out = Json::array();
    for (const auto& [id, scene] : store.scenes()) out.push_back({{"id", id}, {"scene", scene}});
    reply(res, 200, out);
  });

  server.Get("/api/scene/:id", [&store](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, Json(store.scene(req.path_params.at("id")))); });
  });

  server.Post("/api/session", [&store](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const Json body = parse_body(req);
      if (!body.is_object() || !body.contains("scene_id") || !body["scene_id"].is_string()) {
        throw SessionError(SessionError::Kind::invalid, "body needs a string scene_id");
      }
      const std::string participant =
          body.contains("participant") && body["participant"].is_string()
              ? body["participant"].get<std::string>()
              : std::string{};
      const std::string id = store.create(body["scene_id"].get<std::string>(), participant);
      reply(res, 201, Json{{"session_id", id}});
    });
  });

  server.Post("/api/session/:id/event", [&store](const httplib::Request& req,
                                                 httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.path_params.at("id");
      store.metrics(id);  // unknown sessions answer 404 before the body is judged
      EditEvent event;
      try {
        event = parse_body(req).get<EditEvent>();
      } catch (const SessionError&) {
        throw;
      } catch (const Error& e) {
        throw SessionError(SessionError::Kind::invalid, e.what());
      }
      const auto r = store.post_event(id, event);
      Json out{{"scene", r.scene}, {"totals", totals_json(r.totals)}};
      out["selected"] = r.selected ? Json(*r.selected) : Json(nullptr);
      reply(res, 200, out);
    });
  });

  server.Post("/api/session/:id/finish", [&store](const httplib::Request& req,
                                                  httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.path_params.at("id");
      if (store.finished(id)) {
        throw SessionError(SessionError::Kind::conflict, "session already finished");
      }
      TlxResponse tlx;
      try {
        tlx = parse_body(req).get<TlxResponse>();
      } catch (const SessionError&) {
        throw;
      } catch (const Error& e) {
        throw SessionError(SessionError::Kind::invalid, e.what());
      }
      const SessionTotals t = store.finish(id, tlx);
      reply(res, 200, Json{{"session_id", id}, {"metrics", totals_json(t)}});
    });
  });

  server.Get("/api/session/:id/metrics", [&store](const httplib::Request& req,
                                                  httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.path_params.at("id");
      Json out = totals_json(store.metrics(id));
      out["finished"] = store.finished(id);
      reply(res, 200, out);
    });
  });
}

int serve_sessions(const std::string& host, int port, SessionStore& store) {
  httplib::Server server;
  mount_session_api(server, store);
  std::cerr << "serving " << store.scenes().size() << " scenes on " << host << ':' << port << '\n';
  if (!server.listen(host, port)) {
    std::cerr << "error: cannot listen on " << host << ':' << port << '\n';
    return 1;
  }
  return 0;
}

}  // namespace tidy
