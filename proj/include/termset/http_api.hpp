#pragma once

// JSON-over-HTTP front end for SessionService.

#include <exception>
#include <functional>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "termset/error.hpp"
#include "termset/session.hpp"

// After Eigen: glibc's resolv.h, pulled in by httplib, defines a `_res`
// macro that collides with Eigen parameter names.
#include <httplib.h>

namespace termset {

namespace detail {

inline void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, int status, const std::string& code,
                       const std::string& detail) {
  send_json(res, status, {{"error", code}, {"detail", detail}});
}

// Maps library errors onto status codes: 400 validation, 404 not found,
// 409 state-machine violation or busy session, 500 solver/runtime failure.
inline void guarded(httplib::Response& res, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ValidationError& e) {
    send_error(res, 400, "validation", e.what());
  } catch (const NotFoundError& e) {
    send_error(res, 404, "not_found", e.what());
  } catch (const StateError& e) {
    send_error(res, 409, "state_conflict", e.what());
  } catch (const BusyError& e) {
    send_error(res, 409, "busy", e.what());
  } catch (const ConvergenceError& e) {
    send_error(res, 500, "convergence", e.what());
  } catch (const nlohmann::json::exception& e) {
    send_error(res, 400, "validation", std::string("bad request body: ") + e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "internal", e.what());
  }
}

inline nlohmann::json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("request body is not valid JSON: ") + e.what());
  }
}

}  // namespace detail

inline CreateSessionRequest parse_create_request(const nlohmann::json& body) {
  CreateSessionRequest req;
  req.model_id = body.at("model").get<std::string>();
  nlohmann::json cfg = body.value("hyperparams", nlohmann::json::object());
  if (!cfg.is_object()) throw ValidationError("hyperparams must be an object");
  if (body.contains("method")) cfg["method"] = body.at("method");
  if (body.contains("k")) cfg["k"] = body.at("k");
  req.config = cfg.get<ExpansionConfig>();
  req.seed_positives = body.value("seed_positives", std::vector<std::string>{});
  req.seed_negatives = body.value("seed_negatives", std::vector<std::string>{});
  return req;
}

inline void register_routes(httplib::Server& server, SessionService& service) {
  using detail::guarded;
  using detail::send_json;

  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  server.Post("/models", [&](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      auto list = nlohmann::json::array();
      for (const auto& [id, m] : service.models().models())
        list.push_back({{"id", id}, {"dim", m->dim()}, {"vocab_size", m->size()},
                        {"norm", to_string(m->norm_scheme())}});
      send_json(res, 200, {{"models", list}});
    });
  });

  server.Post("/sessions", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      Session s = service.create_session(parse_create_request(detail::parse_body(req)));
      send_json(res, 201, {{"session_id", s.id}});
    });
  });

  server.Get(R"(/sessions/([^/]+))", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, session_to_json(service.get(req.matches[1]))); });
  });

  server.Post(R"(/sessions/([^/]+)/candidates)",
              [&](const httplib::Request& req, httplib::Response& res) {
                guarded(res, [&] {
                  send_json(res, 200, {{"candidates", service.request_candidates(req.matches[1])}});
                });
              });

  server.Post(R"(/sessions/([^/]+)/labels)", [&](const httplib::Request& req,
                                                 httplib::Response& res) {
    guarded(res, [&] {
      const auto body = detail::parse_body(req);
      const auto labels = body.at("labels").get<std::map<std::string, bool>>();
      Session s = service.submit_labels(req.matches[1], labels);
      send_json(res, 200,
                {{"iteration", s.iteration},
                 {"positives_this_round", s.history.empty() ? 0 : s.history.back()},
                 {"history", s.history},
                 {"status", to_string(s.status)}});
    });
  });

  server.Get(R"(/sessions/([^/]+)/export)", [&](const httplib::Request& req,
                                                httplib::Response& res) {
    guarded(res, [&] {
      const std::string mode_s =
          req.has_param("mode") ? req.get_param_value("mode") : "labeled-positives";
      double threshold = 0.0;
      if (req.has_param("threshold")) {
        try {
          threshold = std::stod(req.get_param_value("threshold"));
        } catch (const std::exception&) {
          throw ValidationError("threshold must be a number");
        }
      }
      auto terms = nlohmann::json::array();
      for (const auto& e : service.export_lexicon(req.matches[1], parse_export_mode(mode_s), threshold)) {
        nlohmann::json t = {{"term", e.term}, {"provenance", e.provenance}};
        if (e.score) t["score"] = *e.score;
        terms.push_back(std::move(t));
      }
      send_json(res, 200, {{"terms", terms}});
    });
  });
}

}  // namespace termset
