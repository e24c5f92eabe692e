#include <CLI11.hpp>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <thread>

#include <unistd.h>

#include "peekaboom/autoeval.hpp"
#include "peekaboom/classifier.hpp"
#include "peekaboom/crowdgame.hpp"
#include "peekaboom/dataset.hpp"
#include "peekaboom/encoding.hpp"
#include "peekaboom/error.hpp"
#include "peekaboom/gateway.hpp"
#include "peekaboom/metrics.hpp"
#include "peekaboom/plugin_client.hpp"
#include "peekaboom/png_io.hpp"
#include "peekaboom/random.hpp"
#include "peekaboom/saliency.hpp"
#include "peekaboom/salm.hpp"
#include "peekaboom/simcrowd.hpp"
#include "peekaboom/storage.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace peekaboom;

namespace {

// --config files are flat JSON objects keyed by long option name of the
// selected subcommand.
class ConfigJson : public CLI::Config {
 public:
  explicit ConfigJson(const CLI::App* root) : root_(root) {}

  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    json out = json::object();
    for (const CLI::Option* opt : app->get_options({})) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      const std::string name = opt->get_lnames()[0];
      if (opt->count() > 0) {
        out[name] = opt->results().size() == 1 ? json(opt->results()[0]) : json(opt->results());
      } else if (default_also && !opt->get_default_str().empty()) {
        out[name] = opt->get_default_str();
      }
    }
    return out.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json doc;
    try {
      doc = json::parse(input);
    } catch (const json::exception& e) {
      throw CLI::ConversionError("--config", std::string("not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw CLI::ConversionError("--config", "top level must be an object");
    const auto selected = root_->get_subcommands();
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : doc.items()) {
      CLI::ConfigItem item;
      if (!selected.empty()) item.parents = {selected.front()->get_name()};
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
    return items;
  }

 private:
  const CLI::App* root_;

  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number() || v.is_null()) return v.dump();
    throw CLI::ConversionError("--config", "nested values are not supported");
  }
};

CLI::App* subcommand(CLI::App& app, const std::string& name, const std::string& help,
                     std::uint64_t& seed) {
  CLI::App* sub = app.add_subcommand(name, help);
  sub->add_option("--seed", seed, "Random seed")->capture_default_str();
  return sub;
}

std::string store_default() {
  const char* env = std::getenv("PEEKABOOM_STORE_DIR");
  return env ? env : "";
}

fs::path require_store(const std::string& store) {
  if (store.empty()) throw CLI::RequiredError("--store (or PEEKABOOM_STORE_DIR)");
  return store;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io, "cannot write " + path.string());
  out << text;
  if (!out) fail(Errc::io, "write to " + path.string() + " failed");
}

std::string read_text(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

fs::path salm_path(const fs::path& dir, const std::string& image_id, const std::string& method) {
  return dir / (image_id + "." + method + ".salm");
}

RankingIndex load_rankings(const fs::path& dir, const Dataset& data, const std::string& method) {
  RankingIndex index;
  for (const auto& item : data.items) {
    const fs::path path = salm_path(dir, item.id, method);
    if (!fs::exists(path)) fail(Errc::missing_saliency, "missing " + path.string());
    index[item.id] = rank_pixels(read_salm(path));
  }
  return index;
}

FillStrategy parse_fill(const std::string& text) {
  if (text == "black") return FillStrategy::black();
  if (text.rfind("gray:", 0) == 0) {
    try {
      return FillStrategy::gray(std::stod(text.substr(5)));
    } catch (const std::exception&) {
    }
  }
  throw CLI::ValidationError("--fill", "expected mean, black or gray:<level>, got '" + text + "'");
}

std::vector<Event> read_events(const fs::path& store, const std::string& id) {
  const fs::path path = log_path(store, id);
  if (!fs::exists(path)) fail(Errc::not_found, "no campaign log " + path.string());
  const ReplayResult replayed = replay_file(path);
  if (replayed.error) {
    fail(Errc::schema, path.string() + ": record " + std::to_string(replayed.error->seq) + ": " +
                           replayed.error->message);
  }
  return EventLog::open(path, Durability::flush)->snapshot();
}

Durability parse_durability(const std::string& text) {
  if (text == "fsync") return Durability::fsync;
  if (text == "flush") return Durability::flush;
  return Durability::memory;
}

std::vector<AccuracyCurve> crowd_curves(std::span<const Event> events) {
  const auto trials = completed_trials(events);
  if (trials.empty()) fail(Errc::no_data, "no completed trials");
  const CampaignState state = replay(events).state;
  std::vector<AccuracyCurve> curves;
  for (const auto& method : state.config.methods) {
    curves.push_back(crowd_accuracy_curve(trials, method, state.config.schedule));
  }
  return curves;
}

void print_table(const std::vector<ScoreRow>& rows) {
  for (const auto& row : rows) {
    std::printf("%s\n", row.scheme.c_str());
    for (std::size_t i = 0; i < row.methods.size(); ++i) {
      std::printf("  %-12s auc=%.4f rank=%d\n", row.methods[i].c_str(), row.aucs[i],
                  row.ranks[i]);
    }
  }
}

// Sequential timestamps that continue after the last logged event.
Clock continuing_clock(const std::vector<Event>& events) {
  return logical_clock(events.empty() ? 1 : events.back().timestamp + 1);
}

std::atomic<Gateway*> g_serving{nullptr};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Saliency evaluation harness: synthetic data, crowd game, automated schemes"};
  app.require_subcommand(1);
  app.fallthrough();
  app.config_formatter(std::make_shared<ConfigJson>(&app));
  app.set_config("--config", "", "JSON file with option defaults for the subcommand");
  // gen-synth
  SyntheticDatasetConfig synth;
  std::string synth_out;
  std::uint64_t synth_seed = synth.seed;
  auto* gen = subcommand(app, "gen-synth", "Generate a synthetic shape/color dataset", synth_seed);
  gen->add_option("--out", synth_out, "Output dataset directory")->required();
  gen->add_option("--width", synth.width)->capture_default_str();
  gen->add_option("--height", synth.height)->capture_default_str();
  gen->add_option("--classes", synth.class_count)->capture_default_str();
  gen->add_option("--per-class", synth.images_per_class)->capture_default_str();
  gen->add_option("--noise", synth.noise)->capture_default_str();
  gen->add_option("--prefix", synth.id_prefix)->capture_default_str();

  // train
  TrainConfig tc;
  std::string train_data, train_out, train_test;
  auto* trn = subcommand(app, "train", "Train the built-in classifier", tc.seed);
  trn->add_option("--data", train_data, "Training dataset directory")->required();
  trn->add_option("--out", train_out, "Model output file")->required();
  trn->add_option("--test", train_test, "Optional test dataset to report accuracy on");
  trn->add_option("--lr", tc.learning_rate)->capture_default_str();
  trn->add_option("--epochs", tc.epochs)->capture_default_str();
  trn->add_option("--batch", tc.batch_size)->capture_default_str();
  trn->add_option("--hidden", tc.hidden)->capture_default_str();

  // saliency
  std::string sal_data, sal_method, sal_out, sal_model, sal_endpoint, sal_model_id = "default";
  SmoothGradParams sg;
  std::uint64_t sal_seed = 0;
  auto* sal = subcommand(app, "saliency", "Compute saliency maps for a dataset", sal_seed);
  sal->add_option("--data", sal_data, "Dataset directory")->required();
  sal->add_option("--method", sal_method, "Saliency method")
      ->required()
      ->check(CLI::IsMember({"vanilla", "smoothgrad", "random", "oracle", "gradcam", "guided_bp"}));
  sal->add_option("--out", sal_out, "Directory for <image>.<method>.salm files")->required();
  sal->add_option("--model", sal_model, "Built-in model file (vanilla, smoothgrad)");
  sal->add_option("--endpoint", sal_endpoint, "Plugin base URL for model-based methods");
  sal->add_option("--model-id", sal_model_id, "Plugin model id")->capture_default_str();
  sal->add_option("--samples", sg.samples, "SmoothGrad samples")->capture_default_str();
  sal->add_option("--sigma", sg.sigma, "SmoothGrad noise, fraction of value range")
      ->capture_default_str();

  // campaign-create
  CampaignConfig cc;
  std::string cc_store = store_default();
  std::vector<double> cc_schedule;
  auto* create = subcommand(app, "campaign-create", "Create a crowd campaign in the store", cc.seed);
  create->add_option("--store", cc_store, "Campaign store directory");
  create->add_option("--id", cc.campaign_id, "Campaign id")->required();
  create->add_option("--data", cc.dataset_dir, "Dataset directory")->required();
  create->add_option("--saliency", cc.saliency_dir, "Saliency directory")->required();
  create->add_option("--methods", cc.methods, "Method ids")->required()->delimiter(',');
  create->add_option("--dataset-id", cc.dataset_id, "Dataset label");
  create->add_option("--quota", cc.quota)->capture_default_str();
  create->add_option("--pairs-per-worker", cc.pairs_per_worker)->capture_default_str();
  create->add_option("--wrong-choices", cc.wrong_choices)->capture_default_str();
  create->add_option("--schedule", cc_schedule, "Exposure rates")->delimiter(',');

  // serve
  std::string serve_store = store_default(), serve_bind;
  double serve_ttl_hours = 24;
  std::uint64_t serve_seed = 0;
  auto* serve = subcommand(app, "serve", "Serve the worker/admin HTTP API", serve_seed);
  serve->add_option("--store", serve_store, "Campaign store directory");
  serve->add_option("--bind", serve_bind, "host:port (default PEEKABOOM_BIND_ADDR or 127.0.0.1:8080)");
  serve->add_option("--token-ttl-hours", serve_ttl_hours)->capture_default_str();

  // simulate
  std::string sim_store = store_default(), sim_id, sim_durability = "flush";
  std::size_t sim_workers = 0, sim_threads = 1;
  double theta_min = 0.1, theta_max = 0.9, guess = 0.1;
  bool sim_http = false;
  std::uint64_t sim_seed = 1;
  auto* sim = subcommand(app, "simulate", "Play a campaign with simulated workers", sim_seed);
  sim->add_option("--store", sim_store, "Campaign store directory");
  sim->add_option("--id", sim_id, "Campaign id")->required();
  sim->add_option("--workers", sim_workers, "Population size (0: enough to close)")
      ->capture_default_str();
  sim->add_option("--threads", sim_threads, "Concurrent workers")->capture_default_str();
  sim->add_option("--theta-min", theta_min)->capture_default_str();
  sim->add_option("--theta-max", theta_max)->capture_default_str();
  sim->add_option("--guess", guess)->capture_default_str();
  sim->add_option("--durability", sim_durability)
      ->check(CLI::IsMember({"fsync", "flush"}))
      ->capture_default_str();
  sim->add_flag("--http", sim_http, "Play through an embedded gateway over HTTP");

  // autoeval
  std::string ae_train, ae_test, ae_sal_train, ae_sal_test, ae_model, ae_endpoint, ae_out,
      ae_table, ae_fill = "mean", ae_model_id = "default";
  std::vector<std::string> ae_methods, ae_schemes{"KAE", "ROAE"};
  std::vector<double> ae_schedule;
  TrainConfig ae_tc;
  auto* ae = subcommand(app, "autoeval", "Run ROAR/KAR/ROAE/KAE", ae_tc.seed);
  ae->add_option("--test", ae_test, "Test dataset directory")->required();
  ae->add_option("--saliency-test", ae_sal_test, "Saliency directory for the test set")
      ->required();
  ae->add_option("--train", ae_train, "Training dataset directory (ROAR, KAR)");
  ae->add_option("--saliency-train", ae_sal_train, "Saliency directory for the training set");
  ae->add_option("--methods", ae_methods, "Method ids")->required()->delimiter(',');
  ae->add_option("--schemes", ae_schemes, "Schemes")
      ->delimiter(',')
      ->check(CLI::IsMember({"ROAR", "KAR", "ROAE", "KAE"}))
      ->capture_default_str();
  ae->add_option("--model", ae_model, "Built-in model file (ROAE, KAE)");
  ae->add_option("--endpoint", ae_endpoint, "Plugin base URL (ROAE, KAE)");
  ae->add_option("--model-id", ae_model_id)->capture_default_str();
  ae->add_option("--fill", ae_fill, "mean, black or gray:<level>")->capture_default_str();
  ae->add_option("--schedule", ae_schedule, "Exposure rates")->delimiter(',');
  ae->add_option("--lr", ae_tc.learning_rate)->capture_default_str();
  ae->add_option("--epochs", ae_tc.epochs)->capture_default_str();
  ae->add_option("--batch", ae_tc.batch_size)->capture_default_str();
  ae->add_option("--hidden", ae_tc.hidden)->capture_default_str();
  ae->add_option("--out", ae_out, "Curves CSV")->required();
  ae->add_option("--table", ae_table, "Score table CSV");

  // metrics
  std::string m_store = store_default(), m_id, m_curves, m_table, m_automated, m_corr, m_difficulty;
  std::vector<double> m_levels;
  double m_bin = 0.1;
  std::uint64_t m_seed = 1;
  auto* met = subcommand(app, "metrics", "Crowd curves, AUC table and analyses", m_seed);
  met->add_option("--store", m_store, "Campaign store directory");
  met->add_option("--id", m_id, "Campaign id")->required();
  met->add_option("--curves", m_curves, "Write crowd curves CSV");
  met->add_option("--table", m_table, "Write score table CSV");
  met->add_option("--automated", m_automated, "Automated curves CSV to correlate against");
  met->add_option("--correlations", m_corr, "Write correlation CSV (needs --automated)");
  met->add_option("--difficulty", m_difficulty, "Write difficulty histograms JSON");
  met->add_option("--bin-width", m_bin)->capture_default_str();
  met->add_option("--levels", m_levels, "Workers-per-pair levels for subsampling")
      ->delimiter(',');

  // export
  std::string x_store = store_default(), x_id, x_out, x_what = "snapshot";
  std::uint64_t x_seed = 0;
  auto* exp = subcommand(app, "export", "Export campaign state or crowd results", x_seed);
  exp->add_option("--store", x_store, "Campaign store directory");
  exp->add_option("--id", x_id, "Campaign id")->required();
  exp->add_option("--out", x_out, "Output file")->required();
  exp->add_option("--what", x_what)
      ->check(CLI::IsMember({"snapshot", "events", "curves", "table"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);

    if (gen->parsed()) {
      synth.seed = synth_seed;
      const Dataset data = generate_synthetic_dataset(synth);
      save_dataset(data, synth_out);
      std::printf("wrote %zu images (%d classes) to %s\n", data.items.size(), data.class_count(),
                  synth_out.c_str());
    } else if (trn->parsed()) {
      const Dataset data = load_dataset(train_data);
      const TrainReport report = train(data.items, data.class_count(), tc);
      save_classifier(report.model, train_out);
      std::printf("train_accuracy=%.4f final_loss=%.6f\n", report.train_accuracy,
                  report.final_loss);
      if (!train_test.empty()) {
        const Dataset test = load_dataset(train_test);
        std::printf("test_accuracy=%.4f\n", accuracy(report.model, test.items));
      }
    } else if (sal->parsed()) {
      const Dataset data = load_dataset(sal_data);
      fs::create_directories(sal_out);
      std::optional<Classifier> model;
      std::optional<PluginClient> plugin;
      const bool model_based = sal_method != "random" && sal_method != "oracle";
      if (model_based && !sal_endpoint.empty()) {
        plugin.emplace(sal_endpoint, sal_model_id);
      } else if (model_based) {
        if (sal_method == "gradcam" || sal_method == "guided_bp") {
          fail(Errc::unsupported_method,
               sal_method + " is only available through a plugin (--endpoint)");
        }
        if (sal_model.empty()) throw CLI::RequiredError("--model");
        model = load_classifier(sal_model);
      }
      for (std::size_t i = 0; i < data.items.size(); ++i) {
        const DatasetItem& item = data.items[i];
        const ImageTensor& img = item.image;
        SaliencyMap map;
        if (sal_method == "random") {
          map = generate_random_saliency(img.width, img.height, mix_seed(sal_seed, i), item.id);
        } else if (sal_method == "oracle") {
          map = oracle_saliency(item.object_mask, img.width, img.height, item.id);
        } else if (plugin) {
          const auto scores = plugin->classify(std::span(&img, 1), data.class_names.size());
          map = plugin->saliency(img, sal_method, argmax(scores[0]), item.id);
        } else {
          const int cls = model->predict_class(img.values);
          std::vector<double> raw;
          if (sal_method == "vanilla") {
            raw = model->input_gradient(img.values, cls);
          } else {
            SmoothGradParams params = sg;
            params.seed = mix_seed(sal_seed, i);
            raw = smoothgrad(*model, img.values, cls, params);
          }
          map = reduce_to_spatial(raw, img.width, img.height, img.channels, sal_method, item.id);
        }
        map.method_id = sal_method;
        map.image_id = item.id;
        write_salm(salm_path(sal_out, item.id, sal_method), map);
      }
      std::printf("wrote %zu %s maps to %s\n", data.items.size(), sal_method.c_str(),
                  sal_out.c_str());
    } else if (create->parsed()) {
      const fs::path store = require_store(cc_store);
      if (!cc_schedule.empty()) cc.schedule = ExposureSchedule(cc_schedule);
      if (cc.dataset_id.empty()) cc.dataset_id = fs::path(cc.dataset_dir).filename().string();
      cc.dataset_dir = fs::absolute(cc.dataset_dir).string();
      cc.saliency_dir = fs::absolute(cc.saliency_dir).string();
      const fs::path path = log_path(store, cc.campaign_id);
      if (fs::exists(path) && fs::file_size(path) > 0) {
        fail(Errc::conflict, "campaign '" + cc.campaign_id + "' already exists in " +
                                 store.string());
      }
      auto campaign = Campaign::create(cc, load_campaign_assets(cc),
                                       EventLog::open(path, Durability::fsync), logical_clock());
      std::printf("created %s with %zu pairs at %s\n", cc.campaign_id.c_str(),
                  campaign->snapshot().pairs.size(), path.string().c_str());
    } else if (serve->parsed()) {
      GatewayConfig gc = gateway_config_from_env();
      if (!serve_store.empty()) gc.store_dir = serve_store;
      if (!serve_bind.empty()) {
        const auto colon = serve_bind.rfind(':');
        if (colon == std::string::npos) throw CLI::ValidationError("--bind", "expected host:port");
        gc.host = serve_bind.substr(0, colon);
        try {
          gc.port = std::stoi(serve_bind.substr(colon + 1));
        } catch (const std::exception&) {
          throw CLI::ValidationError("--bind", "bad port in '" + serve_bind + "'");
        }
      }
      require_store(gc.store_dir.string());
      gc.token_ttl_ms = static_cast<std::int64_t>(serve_ttl_hours * 3600 * 1000);

      sigset_t signals;
      sigemptyset(&signals);
      sigaddset(&signals, SIGINT);
      sigaddset(&signals, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &signals, nullptr);

      Gateway gateway(gc);
      std::vector<std::string> skipped;
      const auto loaded = gateway.load_store(&skipped);
      for (const auto& s : skipped) std::fprintf(stderr, "skipped campaign %s\n", s.c_str());
      const int port = gateway.bind();
      std::printf("serving %zu campaigns on %s:%d\n", loaded.size(), gc.host.c_str(), port);
      std::fflush(stdout);
      g_serving = &gateway;
      std::thread waiter([&signals] {
        int sig = 0;
        sigwait(&signals, &sig);
        if (Gateway* g = g_serving.load()) g->stop();
      });
      gateway.listen();
      g_serving = nullptr;
      ::kill(::getpid(), SIGTERM);
      waiter.join();
      std::printf("stopped\n");
    } else if (sim->parsed()) {
      const fs::path store = require_store(sim_store);
      const fs::path path = log_path(store, sim_id);
      if (!fs::exists(path)) fail(Errc::not_found, "no campaign log " + path.string());
      const Durability durability = parse_durability(sim_durability);

      auto run = [&](GameTransport& transport, const Campaign& campaign) {
        const CampaignState state = campaign.snapshot();
        std::size_t workers = sim_workers;
        if (workers == 0) {
          std::size_t remaining = 0;
          for (const auto& p : state.pairs) remaining += static_cast<std::size_t>(p.remaining_quota);
          const auto per = static_cast<std::size_t>(state.config.pairs_per_worker);
          workers = 2 * ((remaining + per - 1) / per) + 100;
        }
        const auto population = make_population(workers, sim_seed, theta_min, theta_max, guess);
        const PerceptionTable perception = build_perception(state, campaign.assets());
        return sim_threads > 1 ? run_simulated_campaign_concurrent(transport, perception,
                                                                   population, sim_seed,
                                                                   sim_threads)
                               : run_simulated_campaign(transport, perception, population,
                                                        sim_seed);
      };

      SimulationReport report;
      if (sim_http) {
        GatewayConfig gc;
        gc.store_dir = store;
        gc.port = 0;
        gc.durability = durability;
        const auto previous = read_events(store, sim_id);
        gc.clock_factory = [&previous] { return continuing_clock(previous); };
        Gateway gateway(gc);
        std::vector<std::string> skipped;
        gateway.load_store(&skipped);
        Campaign* campaign = gateway.find_campaign(sim_id);
        if (!campaign) fail(Errc::not_found, "campaign '" + sim_id + "' could not be loaded");
        const int port = gateway.start();
        HttpGameTransport transport("127.0.0.1", port, sim_id);
        report = run(transport, *campaign);
        gateway.stop();
      } else {
        auto log = EventLog::open(path, durability);
        const auto previous = log->snapshot();
        const CampaignState state = replay(previous).state;
        auto campaign = Campaign::resume(load_campaign_assets(state.config), std::move(log),
                                         continuing_clock(previous));
        InProcessTransport transport(*campaign);
        report = run(transport, *campaign);
      }
      std::printf("workers=%zu trials=%zu answers=%zu\n", report.workers_used,
                  report.trials_played, report.answers);
    } else if (ae->parsed()) {
      const Dataset test = load_dataset(ae_test);
      std::optional<Dataset> trainset;
      std::optional<Classifier> model;
      std::unique_ptr<ImageClassifier> scorer;
      std::vector<AccuracyCurve> curves;
      for (const auto& scheme_text : ae_schemes) {
        const Scheme scheme = parse_scheme(scheme_text);
        if (retrains(scheme)) {
          if (ae_train.empty()) throw CLI::RequiredError("--train");
          if (ae_sal_train.empty()) throw CLI::RequiredError("--saliency-train");
          if (!trainset) trainset = load_dataset(ae_train);
        } else if (!scorer) {
          if (!ae_endpoint.empty()) {
            scorer = std::make_unique<RemoteImageClassifier>(
                PluginClient(ae_endpoint, ae_model_id), test.class_names.size());
          } else {
            if (ae_model.empty()) throw CLI::RequiredError("--model");
            model = load_classifier(ae_model);
            scorer = std::make_unique<BuiltinImageClassifier>(*model);
          }
        }
        for (const auto& method : ae_methods) {
          AutoEvalJob job;
          job.scheme = scheme;
          job.method_id = method;
          job.train = ae_tc;
          if (!ae_schedule.empty()) job.schedule = ExposureSchedule(ae_schedule);
          if (ae_fill != "mean") job.fill = parse_fill(ae_fill);
          if (retrains(scheme)) {
            const RetrainResult result =
                retrain_curve(job, trainset->items, test.items, trainset->class_count(),
                              load_rankings(ae_sal_train, *trainset, method));
            for (const auto& f : result.failures) {
              std::fprintf(stderr, "%s %s: rate %g failed: %s\n", scheme_text.c_str(),
                           method.c_str(), f.rate, f.message.c_str());
            }
            if (!result.failures.empty()) {
              fail(Errc::training_diverged, "retraining diverged for " + method);
            }
            curves.push_back(result.curve);
          } else {
            curves.push_back(masked_eval_curve(job, test.items,
                                               load_rankings(ae_sal_test, test, method), *scorer));
          }
          std::printf("%s %s auc=%.4f\n", scheme_text.c_str(), method.c_str(),
                      auc(curves.back()));
        }
      }
      write_text(ae_out, export_curves_csv(curves));
      if (!ae_table.empty()) write_text(ae_table, export_table_csv(score_table(curves)));
    } else if (met->parsed()) {
      const auto events = read_events(require_store(m_store), m_id);
      const auto curves = crowd_curves(events);
      const auto table = score_table(curves);
      print_table(table);
      if (!m_curves.empty()) write_text(m_curves, export_curves_csv(curves));
      if (!m_table.empty()) write_text(m_table, export_table_csv(table));
      const auto trials = completed_trials(events);
      const CampaignState state = replay(events).state;
      if (!m_automated.empty()) {
        const auto automated = parse_curves_csv(read_text(m_automated));
        const auto corr = correlation_vs_exposure(curves, automated, state.config.schedule);
        std::string csv = "scheme,rate,spearman,kendall\n";
        for (const auto& [scheme, rows] : corr) {
          for (const auto& r : rows) {
            csv += scheme + "," + format_double(r.rate) + "," + format_double(r.spearman) + "," +
                   format_double(r.kendall) + "\n";
          }
        }
        if (m_corr.empty()) {
          std::fputs(csv.c_str(), stdout);
        } else {
          write_text(m_corr, csv);
        }
      } else if (!m_corr.empty()) {
        throw CLI::RequiredError("--automated");
      }
      if (!m_difficulty.empty()) {
        const DifficultyReport d = difficulty_histograms(trials, m_bin);
        json doc{{"bin_width", m_bin},
                 {"images", d.images.counts},
                 {"workers", d.workers.counts},
                 {"image_mean_rate", d.image_mean_rate},
                 {"worker_mean_rate", d.worker_mean_rate}};
        write_text(m_difficulty, doc.dump(2) + "\n");
      }
      if (!m_levels.empty()) {
        const auto rows = subsample_analysis(trials, m_levels, state.config.methods,
                                             state.config.schedule, m_seed);
        for (const auto& row : rows) {
          std::printf("level %s:", format_double(row.level).c_str());
          for (std::size_t i = 0; i < row.scores.methods.size(); ++i) {
            std::printf(" %s=%.4f(%d)", row.scores.methods[i].c_str(), row.scores.aucs[i],
                        row.scores.ranks[i]);
          }
          std::printf("\n");
        }
      }
    } else if (exp->parsed()) {
      const auto events = read_events(require_store(x_store), x_id);
      std::string text;
      if (x_what == "snapshot") {
        text = export_snapshot(replay(events).state);
      } else if (x_what == "events") {
        for (const auto& e : events) text += encode_event(e) + "\n";
      } else if (x_what == "curves") {
        text = export_curves_csv(crowd_curves(events));
      } else {
        text = export_table_csv(score_table(crowd_curves(events)));
      }
      write_text(x_out, text);
      std::printf("wrote %s\n", x_out.c_str());
    }
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    std::fprintf(stderr, "run with --help for usage\n");
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
