#include "peekaboom/gateway.hpp"

#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <json.hpp>

#include "peekaboom/encoding.hpp"
#include "peekaboom/metrics.hpp"
#include "peekaboom/png_io.hpp"

namespace peekaboom {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kJson = "application/json";

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

void send_error(httplib::Response& res, int status, std::string_view code,
                const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", code}, {"message", message}}.dump(), kJson);
}

// Runs a handler, turning exceptions into JSON error bodies.
template <class F>
void guarded(httplib::Response& res, F&& body) {
  try {
    body();
  } catch (const Error& e) {
    send_error(res, http_status(e.code()), errc_name(e.code()), e.what());
  } catch (const json::exception& e) {
    send_error(res, 400, "schema", std::string("malformed request body: ") + e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "internal", e.what());
  }
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  json doc = json::parse(req.body);
  if (!doc.is_object()) fail(Errc::schema, "request body must be a JSON object");
  return doc;
}

std::string request_token(const httplib::Request& req) {
  const std::string auth = req.get_header_value("Authorization");
  constexpr std::string_view bearer = "Bearer ";
  if (auth.rfind(bearer, 0) == 0) return auth.substr(bearer.size());
  if (req.has_param("token")) return req.get_param_value("token");
  fail(Errc::unauthorized, "missing worker token");
}

json view_json(const TaskView& view) {
  return json{{"trial_id", view.trial_id},
              {"pair_id", view.pair_id},
              {"step", view.step},
              {"rate", view.rate},
              {"image_png_b64", base64_encode(encode_png(view.image))},
              {"choices", view.choices.labels},
              {"idk_allowed", view.idk_allowed}};
}

json curve_json(const AccuracyCurve& curve) {
  json points = json::array();
  for (const auto& p : curve.points) points.push_back({p.rate, p.accuracy});
  return json{{"method", curve.method_id}, {"scheme", curve.scheme}, {"points", points}};
}

WorkerView parse_view(const json& doc) {
  WorkerView view;
  view.trial_id = doc.at("trial_id").get<std::string>();
  view.pair_id = doc.at("pair_id").get<std::string>();
  view.step = doc.at("step").get<int>();
  view.choices.labels = doc.at("choices").get<std::vector<std::string>>();
  return view;
}

}  // namespace

int http_status(Errc code) {
  switch (code) {
    case Errc::invalid_argument:
    case Errc::non_finite:
    case Errc::out_of_range:
    case Errc::dimension_mismatch:
    case Errc::schema:
    case Errc::protocol:
      return 400;
    case Errc::unauthorized:
      return 401;
    case Errc::unknown_worker:
      return 403;
    case Errc::not_found:
    case Errc::missing_saliency:
    case Errc::no_data:
      return 404;
    case Errc::conflict:
    case Errc::sequence:
      return 409;
    case Errc::campaign_closed:
      return 410;
    default:
      return 500;
  }
}

GatewayConfig gateway_config_from_env(GatewayConfig base) {
  if (const char* store = std::getenv("PEEKABOOM_STORE_DIR"); store && *store) {
    base.store_dir = store;
  }
  if (const char* bind = std::getenv("PEEKABOOM_BIND_ADDR"); bind && *bind) {
    const std::string addr = bind;
    const auto colon = addr.rfind(':');
    if (colon == std::string::npos) {
      base.host = addr;
    } else {
      base.host = addr.substr(0, colon);
      try {
        base.port = std::stoi(addr.substr(colon + 1));
      } catch (const std::exception&) {
        fail(Errc::invalid_argument, "PEEKABOOM_BIND_ADDR has a bad port: '" + addr + "'");
      }
    }
  }
  return base;
}

Gateway::Gateway(GatewayConfig config)
    : config_(std::move(config)), server_(std::make_unique<httplib::Server>()) {
  if (!config_.store_dir.empty()) {
    std::error_code ec;
    fs::create_directories(config_.store_dir, ec);
    if (ec || !fs::is_directory(config_.store_dir)) {
      fail(Errc::io, "campaign store unavailable: " + config_.store_dir.string());
    }
  }
  routes();
}

Gateway::~Gateway() { stop(); }

Clock Gateway::make_clock() const {
  return config_.clock_factory ? config_.clock_factory() : system_clock();
}

std::unique_ptr<EventLog> Gateway::open_log(const std::string& campaign_id, bool must_be_new) {
  if (config_.store_dir.empty() || config_.durability == Durability::memory) {
    return EventLog::open(campaign_id, Durability::memory);
  }
  const fs::path path = log_path(config_.store_dir, campaign_id);
  if (must_be_new && fs::exists(path) && fs::file_size(path) > 0) {
    fail(Errc::conflict, "campaign '" + campaign_id + "' already exists in the store");
  }
  return EventLog::open(path, config_.durability);
}

std::vector<std::string> Gateway::load_store(std::vector<std::string>* skipped) {
  std::vector<std::string> loaded;
  if (config_.store_dir.empty()) return loaded;
  constexpr std::string_view suffix = ".events.jsonl";
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(config_.store_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > suffix.size() && name.ends_with(suffix)) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    const std::string name = path.filename().string();
    const std::string id = name.substr(0, name.size() - suffix.size());
    try {
      auto log = EventLog::open(path, config_.durability);
      const ReplayResult replayed = replay(log->snapshot());
      if (replayed.error) {
        fail(Errc::schema, "replay halted at record " + std::to_string(replayed.error->seq) +
                               ": " + replayed.error->message);
      }
      CampaignAssets assets = load_campaign_assets(replayed.state.config);
      auto campaign = Campaign::resume(std::move(assets), std::move(log), make_clock());
      std::lock_guard lock(mu_);
      campaigns_[id] = std::move(campaign);
      loaded.push_back(id);
    } catch (const std::exception& e) {
      if (skipped) skipped->push_back(id + ": " + e.what());
    }
  }
  return loaded;
}

Campaign& Gateway::add_campaign(const CampaignConfig& config, CampaignAssets assets) {
  std::lock_guard lock(mu_);
  if (campaigns_.count(config.campaign_id)) {
    fail(Errc::conflict, "campaign '" + config.campaign_id + "' already exists");
  }
  auto campaign =
      Campaign::create(config, std::move(assets), open_log(config.campaign_id, true), make_clock());
  Campaign& ref = *campaign;
  campaigns_[config.campaign_id] = std::move(campaign);
  return ref;
}

Campaign* Gateway::find_campaign(const std::string& id) {
  std::lock_guard lock(mu_);
  auto it = campaigns_.find(id);
  return it == campaigns_.end() ? nullptr : it->second.get();
}

ApiSession Gateway::issue_token(const std::string& campaign_id, const std::string& worker_id) {
  ApiSession session{random_token(16), worker_id, campaign_id,
                     now_ms() + config_.token_ttl_ms};
  std::lock_guard lock(mu_);
  sessions_[session.token] = session;
  return session;
}

ApiSession Gateway::session_for(const std::string& token) {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(token);
  if (it == sessions_.end()) fail(Errc::unauthorized, "unknown worker token");
  if (it->second.expires_at_ms <= now_ms()) {
    sessions_.erase(it);
    fail(Errc::unauthorized, "worker token expired");
  }
  return it->second;
}

void Gateway::routes() {
  auto& s = *server_;

  s.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"status":"ok"})", kJson);
  });

  s.Post("/api/v1/campaigns", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      json doc = parse_body(req);
      const json& cfg = doc.contains("config") ? doc.at("config") : doc;
      const CampaignConfig config = CampaignConfig::from_json(cfg);
      if (find_campaign(config.campaign_id)) {
        fail(Errc::conflict, "campaign '" + config.campaign_id + "' already exists");
      }
      Campaign& campaign = add_campaign(config, load_campaign_assets(config));
      res.status = 201;
      res.set_content(json{{"campaign_id", campaign.id()},
                           {"pairs", campaign.snapshot().pairs.size()}}
                          .dump(),
                      kJson);
    });
  });

  s.Post("/api/v1/workers", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json doc = parse_body(req);
      const std::string id = doc.at("campaign_id").get<std::string>();
      Campaign* campaign = find_campaign(id);
      if (!campaign) fail(Errc::not_found, "unknown campaign '" + id + "'");
      const std::string worker = campaign->register_worker();
      const ApiSession session = issue_token(id, worker);
      res.status = 201;
      res.set_content(json{{"worker_token", session.token},
                           {"worker_id", worker},
                           {"expires_at", session.expires_at_ms}}
                          .dump(),
                      kJson);
    });
  });

  s.Post(R"(/api/v1/campaigns/([^/]+)/assignments)",
         [this](const httplib::Request& req, httplib::Response& res) {
           guarded(res, [&] {
             const ApiSession session = session_for(request_token(req));
             const std::string id = req.matches[1];
             if (session.campaign_id != id) {
               fail(Errc::unauthorized, "token does not belong to campaign '" + id + "'");
             }
             Campaign* campaign = find_campaign(id);
             if (!campaign) fail(Errc::not_found, "unknown campaign '" + id + "'");
             res.set_content(json{{"pairs", campaign->assign_tasks(session.worker_id)}}.dump(),
                             kJson);
           });
         });

  s.Get("/api/v1/trials/next", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const ApiSession session = session_for(request_token(req));
      Campaign* campaign = find_campaign(session.campaign_id);
      if (!campaign) fail(Errc::not_found, "campaign no longer served");
      const auto view = campaign->next_trial(session.worker_id);
      res.set_content(view ? view_json(*view).dump() : json{{"done", true}}.dump(), kJson);
    });
  });

  s.Post(R"(/api/v1/trials/([^/]+)/answers)",
         [this](const httplib::Request& req, httplib::Response& res) {
           guarded(res, [&] {
             const ApiSession session = session_for(request_token(req));
             const json doc = parse_body(req);
             Campaign* campaign = find_campaign(session.campaign_id);
             if (!campaign) fail(Errc::not_found, "campaign no longer served");
             const TrialOutcome out =
                 campaign->submit_answer(session.worker_id, req.matches[1],
                                         doc.at("step").get<int>(),
                                         doc.at("choice").get<std::string>());
             json body{{"outcome", TrialOutcome::kind_name(out.kind)}, {"rate", out.rate}};
             if (out.next) body["next"] = view_json(*out.next);
             res.set_content(body.dump(), kJson);
           });
         });

  s.Post(R"(/api/v1/trials/([^/]+)/abandon)",
         [this](const httplib::Request& req, httplib::Response& res) {
           guarded(res, [&] {
             const ApiSession session = session_for(request_token(req));
             Campaign* campaign = find_campaign(session.campaign_id);
             if (!campaign) fail(Errc::not_found, "campaign no longer served");
             campaign->abandon_trial(session.worker_id, req.matches[1]);
             res.set_content(R"({"status":"abandoned"})", kJson);
           });
         });

  s.Get(R"(/api/v1/campaigns/([^/]+)/metrics)",
        [this](const httplib::Request& req, httplib::Response& res) {
          guarded(res, [&] {
            const std::string id = req.matches[1];
            Campaign* campaign = find_campaign(id);
            if (!campaign) fail(Errc::not_found, "unknown campaign '" + id + "'");
            const auto events = campaign->events();
            const auto trials = completed_trials(events);
            if (trials.empty()) fail(Errc::no_data, "no completed trials");
            const CampaignState state = campaign->snapshot();
            std::vector<AccuracyCurve> curves;
            for (const auto& method : state.config.methods) {
              curves.push_back(crowd_accuracy_curve(trials, method, state.config.schedule));
            }
            json body{{"campaign_id", id},
                      {"trials", trials.size()},
                      {"curves", json::array()},
                      {"table", json::array()}};
            for (const auto& c : curves) body["curves"].push_back(curve_json(c));
            for (const auto& row : score_table(curves)) {
              for (std::size_t i = 0; i < row.methods.size(); ++i) {
                body["table"].push_back({{"scheme", row.scheme},
                                         {"method", row.methods[i]},
                                         {"auc", row.aucs[i]},
                                         {"rank", row.ranks[i]}});
              }
            }
            res.set_content(body.dump(), kJson);
          });
        });

  s.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    if (res.status == 404) {
      send_error(res, 404, "not_found", "no route for " + req.method + " " + req.path);
    } else {
      send_error(res, res.status, "http", httplib::status_message(res.status));
    }
  });
}

int Gateway::bind() {
  if (config_.port == 0) {
    port_ = server_->bind_to_any_port(config_.host);
  } else {
    port_ = server_->bind_to_port(config_.host, config_.port) ? config_.port : -1;
  }
  if (port_ <= 0) {
    fail(Errc::io, "cannot bind " + config_.host + ":" + std::to_string(config_.port));
  }
  return port_;
}

void Gateway::listen() {
  if (!server_->listen_after_bind()) {
    if (server_->is_running()) fail(Errc::io, "gateway stopped unexpectedly");
  }
}

int Gateway::start() {
  const int port = bind();
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port;
}

void Gateway::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

HttpGameTransport::HttpGameTransport(std::string host, int port, std::string campaign_id)
    : host_(std::move(host)), port_(port), campaign_id_(std::move(campaign_id)) {}

namespace {

json call(const std::string& host, int port, const std::string& method, const std::string& path,
          const std::string& token, const json& body) {
  httplib::Client client(host, port);
  client.set_connection_timeout(10, 0);
  client.set_read_timeout(30, 0);
  httplib::Headers headers;
  if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);
  auto res = method == "GET" ? client.Get(path, headers)
                             : client.Post(path, headers, body.dump(), kJson);
  if (!res) {
    fail(Errc::transport, method + " " + path + " failed: " + httplib::to_string(res.error()));
  }
  json doc;
  try {
    doc = json::parse(res->body);
  } catch (const json::exception&) {
    fail(Errc::protocol, method + " " + path + " returned a non-JSON body");
  }
  if (res->status >= 400) {
    const std::string name = doc.value("error", "");
    const std::string message = doc.value("message", name);
    fail(parse_errc(name).value_or(Errc::protocol), message);
  }
  return doc;
}

}  // namespace

std::string HttpGameTransport::token(const std::string& worker) {
  std::lock_guard lock(mu_);
  auto it = tokens_.find(worker);
  if (it == tokens_.end()) fail(Errc::unknown_worker, "no token for worker '" + worker + "'");
  return it->second;
}

std::string HttpGameTransport::register_worker() {
  const json doc = call(host_, port_, "POST", "/api/v1/workers", "",
                        json{{"campaign_id", campaign_id_}});
  const std::string worker = doc.at("worker_id").get<std::string>();
  std::lock_guard lock(mu_);
  tokens_[worker] = doc.at("worker_token").get<std::string>();
  return worker;
}

std::vector<std::string> HttpGameTransport::assign(const std::string& worker) {
  const json doc = call(host_, port_, "POST",
                        "/api/v1/campaigns/" + campaign_id_ + "/assignments", token(worker),
                        json::object());
  return doc.at("pairs").get<std::vector<std::string>>();
}

std::optional<WorkerView> HttpGameTransport::next_trial(const std::string& worker) {
  const json doc = call(host_, port_, "GET", "/api/v1/trials/next", token(worker), {});
  if (doc.value("done", false)) return std::nullopt;
  return parse_view(doc);
}

WorkerOutcome HttpGameTransport::submit(const std::string& worker, const std::string& trial_id,
                                        int step, const std::string& choice) {
  const json doc = call(host_, port_, "POST", "/api/v1/trials/" + trial_id + "/answers",
                        token(worker), json{{"step", step}, {"choice", choice}});
  WorkerOutcome out;
  const std::string kind = doc.at("outcome").get<std::string>();
  if (kind == "advance") {
    out.kind = TrialOutcome::Kind::advance;
    out.next = parse_view(doc.at("next"));
  } else if (kind == "correct") {
    out.kind = TrialOutcome::Kind::correct;
  } else if (kind == "exhausted") {
    out.kind = TrialOutcome::Kind::exhausted;
  } else {
    fail(Errc::protocol, "unknown outcome '" + kind + "'");
  }
  return out;
}

}  // namespace peekaboom
