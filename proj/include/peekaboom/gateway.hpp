#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "peekaboom/crowdgame.hpp"
#include "peekaboom/error.hpp"
#include "peekaboom/simcrowd.hpp"
#include "peekaboom/storage.hpp"

namespace httplib {
class Server;
}

namespace peekaboom {

struct GatewayConfig {
  // Empty: campaigns live in memory only.
  std::filesystem::path store_dir;
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  Durability durability = Durability::fsync;
  std::int64_t token_ttl_ms = 24LL * 3600 * 1000;
  // One clock per campaign; defaults to wall time.
  std::function<Clock()> clock_factory;
};

// Applies PEEKABOOM_STORE_DIR and PEEKABOOM_BIND_ADDR ("host:port") over
// `base`.
GatewayConfig gateway_config_from_env(GatewayConfig base = {});

// HTTP status for a library error code.
int http_status(Errc code);

struct ApiSession {
  std::string token;
  std::string worker_id;
  std::string campaign_id;
  std::int64_t expires_at_ms = 0;
};

// Worker and admin API under /api/v1.
//   POST /api/v1/campaigns                  {config} -> {campaign_id, pairs}
//   POST /api/v1/workers                    {campaign_id} -> {worker_token, worker_id, expires_at}
//   POST /api/v1/campaigns/{id}/assignments -> {pairs}
//   GET  /api/v1/trials/next                -> task view, or {done: true}
//   POST /api/v1/trials/{id}/answers        {step, choice} -> {outcome, rate, next?}
//   POST /api/v1/trials/{id}/abandon        -> {status}
//   GET  /api/v1/campaigns/{id}/metrics     -> {trials, curves, table}
//   GET  /healthz                           -> {status: "ok"}
// Worker calls take "Authorization: Bearer <token>" or ?token=. Errors are
// {error, message} with a status from http_status().
class Gateway {
 public:
  explicit Gateway(GatewayConfig config);
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  // Resumes every <id>.events.jsonl in the store whose assets load. Returns
  // the ids resumed; failures are reported in `skipped`.
  std::vector<std::string> load_store(std::vector<std::string>* skipped = nullptr);

  // Creates a campaign from in-memory assets (the HTTP route loads them
  // from the config's dataset/saliency dirs).
  Campaign& add_campaign(const CampaignConfig& config, CampaignAssets assets);
  Campaign* find_campaign(const std::string& id);

  // Binds and returns the port; Error(io) on failure.
  int bind();
  // Serves until stop(); bind() first.
  void listen();
  // bind() + listen() on a background thread.
  int start();
  // Stops accepting and waits for in-flight requests.
  void stop();
  int port() const { return port_; }

 private:
  void routes();
  ApiSession session_for(const std::string& token);
  ApiSession issue_token(const std::string& campaign_id, const std::string& worker_id);
  std::unique_ptr<EventLog> open_log(const std::string& campaign_id, bool must_be_new);
  Clock make_clock() const;

  GatewayConfig config_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;

  std::mutex mu_;
  std::map<std::string, std::unique_ptr<Campaign>> campaigns_;
  std::map<std::string, ApiSession> sessions_;
};

// Worker side of the API, for simulations and tests.
class HttpGameTransport : public GameTransport {
 public:
  HttpGameTransport(std::string host, int port, std::string campaign_id);

  std::string register_worker() override;
  std::vector<std::string> assign(const std::string& worker) override;
  std::optional<WorkerView> next_trial(const std::string& worker) override;
  WorkerOutcome submit(const std::string& worker, const std::string& trial_id, int step,
                       const std::string& choice) override;

 private:
  std::string token(const std::string& worker);

  std::string host_;
  int port_;
  std::string campaign_id_;
  std::mutex mu_;
  std::map<std::string, std::string> tokens_;
};

}  // namespace peekaboom
