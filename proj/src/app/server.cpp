#include "trialmatch/app/server.hpp"

#include <charconv>
#include <mutex>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

namespace trialmatch::app {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}, {"status", status}});
}

json patient_json(const corpus::PatientNote& p) {
  return {{"patient_id", p.patient_id}, {"text", p.raw_text}, {"sentences", p.sentences}};
}

json criteria_json(const std::vector<corpus::Criterion>& cs) {
  auto arr = json::array();
  for (const auto& c : cs) arr.push_back({{"index", c.index}, {"text", c.text}});
  return arr;
}

}  // namespace

struct ApiServer::Impl {
  const ArtifactStore& store;
  DecisionLog& log;
  ServerConfig config;
  httplib::Server server;
  int port = -1;
  std::mutex lifecycle_mu;
  bool stop_requested = false;
  bool listening = false;

  Impl(const ArtifactStore& s, DecisionLog& l, ServerConfig c)
      : store(s), log(l), config(std::move(c)) {
    routes();
  }

  void routes() {
    server.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Origin", "*");
      res.set_header("Access-Control-Allow-Headers", "Authorization, Content-Type");
      if (req.method == "OPTIONS") {
        res.status = 204;
        return httplib::Server::HandlerResponse::Handled;
      }
      if (!config.bearer_token.empty() &&
          req.get_header_value("Authorization") != "Bearer " + config.bearer_token) {
        send_error(res, 401, "missing or invalid bearer token");
        return httplib::Server::HandlerResponse::Handled;
      }
      return httplib::Server::HandlerResponse::Unhandled;
    });
    server.set_exception_handler(
        [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
          try {
            std::rethrow_exception(ep);
          } catch (const std::exception& e) {
            spdlog::error("request failed: {}", e.what());
            send_error(res, 500, e.what());
          } catch (...) {
            send_error(res, 500, "internal error");
          }
        });
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) send_error(res, res.status, res.status == 404 ? "not found" : "error");
    });

    server.Get("/cohorts", [this](const httplib::Request&, httplib::Response& res) {
      auto c = to_json(store.cohort());
      send_json(res, 200, {{"cohorts", json::array({c})}});
    });

    server.Get(R"(/patients/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto* p = store.patient(req.matches[1]);
      if (!p) return send_error(res, 404, "unknown patient " + std::string(req.matches[1]));
      auto j = patient_json(*p);
      j["candidates"] = store.scores_for(p->patient_id).size();
      send_json(res, 200, j);
    });

    server.Get(R"(/patients/([^/]+)/ranking)",
               [this](const httplib::Request& req, httplib::Response& res) { ranking(req, res); });

    server.Get(R"(/match/([^/]+)/([^/]+))",
               [this](const httplib::Request& req, httplib::Response& res) { match(req, res); });

    server.Get(R"(/assignments/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto& a = store.assignment();
      std::string who = req.matches[1];
      if (!a || !a->has_annotator(who)) return send_error(res, 404, "unknown annotator " + who);
      auto items = json::array();
      for (const auto& t : a->tasks_for(who)) {
        items.push_back({{"patient_id", t.patient_id}, {"nct_id", t.nct_id}, {"assisted", t.assisted}});
      }
      send_json(res, 200, {{"annotator", who}, {"items", items}});
    });

    server.Post("/decisions", [this](const httplib::Request& req, httplib::Response& res) {
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::parse_error&) {
        return send_error(res, 400, "body is not valid JSON");
      }
      try {
        auto d = decision_from_json(body);
        log.append(d);
        send_json(res, 201, to_json(d));
      } catch (const ValidationError& e) {
        send_error(res, 400, e.what());
      } catch (const DuplicateDecision& e) {
        send_error(res, 409, e.what());
      }
    });

    server.Get("/decisions/export", [this](const httplib::Request&, httplib::Response& res) {
      res.status = 200;
      res.set_content(log.export_csv(), "text/csv");
    });

    server.Get("/screening/summary", [this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, screening_summary(log.decisions()).to_json());
    });
  }

  void ranking(const httplib::Request& req, httplib::Response& res) {
    std::string pid = req.matches[1];
    if (!store.patient(pid)) return send_error(res, 404, "unknown patient " + pid);
    ranking::Feature feature = ranking::Feature::combination;
    if (req.has_param("feature")) {
      try {
        feature = ranking::feature_from_string(req.get_param_value("feature"));
      } catch (const ConfigError& e) {
        return send_error(res, 400, e.what());
      }
    }
    std::size_t top = 0;
    if (req.has_param("top")) {
      auto v = req.get_param_value("top");
      auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), top);
      if (ec != std::errc() || ptr != v.data() + v.size() || top == 0) {
        return send_error(res, 400, "'top' must be a positive integer");
      }
    }
    auto scores = store.scores_for(pid);
    auto ranked = ranking::ranked_scores(scores, feature);
    if (top > 0 && ranked.size() > top) ranked.resize(top);
    auto items = json::array();
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      const auto* s = store.score(pid, ranked[i].first);
      const auto* t = store.trial(ranked[i].first);
      items.push_back({{"rank", i + 1},
                       {"nct_id", ranked[i].first},
                       {"title", t ? t->title : ""},
                       {"score", ranked[i].second},
                       {"combined_ranking", s->combined_ranking},
                       {"exclusion_score", s->exclusion_score}});
    }
    send_json(res, 200, {{"patient_id", pid}, {"feature", ranking::to_string(feature)}, {"ranking", items}});
  }

  void match(const httplib::Request& req, httplib::Response& res) {
    std::string pid = req.matches[1], nct = req.matches[2];
    const auto* p = store.patient(pid);
    if (!p) return send_error(res, 404, "unknown patient " + pid);
    const auto* t = store.trial(nct);
    if (!t) return send_error(res, 404, "unknown trial " + nct);
    const auto* m = store.match(pid, nct);
    if (!m) return send_error(res, 404, "no match result for (" + pid + ", " + nct + ")");
    json j = matching::to_json(*m);
    j["trial"] = {{"nct_id", t->nct_id},
                  {"title", t->title},
                  {"inclusion_criteria", criteria_json(t->inclusion_criteria)},
                  {"exclusion_criteria", criteria_json(t->exclusion_criteria)}};
    j["patient"] = patient_json(*p);
    const auto* s = store.score(pid, nct);
    j["score"] = s ? ranking::to_json(*s) : json(nullptr);
    send_json(res, 200, j);
  }
};

ApiServer::ApiServer(const ArtifactStore& store, DecisionLog& log, ServerConfig config)
    : impl_(std::make_unique<Impl>(store, log, std::move(config))) {}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind() {
  if (impl_->config.port == 0) {
    impl_->port = impl_->server.bind_to_any_port(impl_->config.host);
  } else if (impl_->server.bind_to_port(impl_->config.host, impl_->config.port)) {
    impl_->port = impl_->config.port;
  }
  if (impl_->port < 0) {
    throw Error("cannot bind " + impl_->config.host + ":" + std::to_string(impl_->config.port));
  }
  return impl_->port;
}

void ApiServer::listen() {
  {
    std::lock_guard lock(impl_->lifecycle_mu);
    if (impl_->stop_requested) return;
    impl_->listening = true;
  }
  impl_->server.listen_after_bind();
}

void ApiServer::stop() {
  if (!impl_) return;
  bool started = false;
  {
    std::lock_guard lock(impl_->lifecycle_mu);
    impl_->stop_requested = true;
    started = impl_->listening;
  }
  // httplib ignores stop() until its accept loop is running.
  if (started) {
    impl_->server.wait_until_ready();
    impl_->server.stop();
  }
}

}  // namespace trialmatch::app
