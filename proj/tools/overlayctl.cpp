// overlayctl: operator tool for the overlay repository.
//
// Exit codes: 0 success, 1 user error, 2 system error.

#include <csignal>
#include <condition_variable>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <thread>

#include <CLI11.hpp>

#include "overlay/content_model.hpp"
#include "overlay/errors.hpp"
#include "overlay/fixture_loader.hpp"
#include "overlay/gateway.hpp"
#include "overlay/harvester.hpp"
#include "overlay/object_store.hpp"
#include "overlay/provider.hpp"

using namespace overlay;

namespace {

struct Globals {
  std::string config_path;
  std::string data_dir;
  bool porcelain = false;
};

bool is_user_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::storage:
    case ErrorCode::dissemination:
      return false;
    default:
      return true;
  }
}

class Repository {
 public:
  explicit Repository(const ServiceConfig& config) : config_(config) {
    std::error_code ec;
    std::filesystem::create_directories(config.data_dir, ec);
    if (ec) throw Error(ErrorCode::storage, "cannot create " + config.data_dir + ": " + ec.message());
    store_.emplace(StoreOptions{config.database_path(), config.handle_prefix, system_clock()});
    ContentModelOptions cm;
    cm.default_page_size = config.member_page_size;
    model_.emplace(*store_, cm);
  }

  ObjectStore& store() { return *store_; }
  ContentModel& model() { return *model_; }
  const ServiceConfig& config() const { return config_; }

  /// Registered providers, plus inline config entries not yet registered.
  std::vector<ProviderConfig> providers() const {
    auto registered = load_providers(config_.providers_path());
    for (const auto& p : config_.providers) {
      bool known = std::any_of(registered.begin(), registered.end(), [&](const auto& r) { return r.id == p.id; });
      if (!known) registered.push_back(p);
    }
    return registered;
  }

  /// Provisions `cfg` if needed and records it in providers.json.
  ProviderConfig ensure_registered(Harvester& harvester, ProviderConfig cfg) {
    cfg = harvester.provision(std::move(cfg));
    auto registered = load_providers(config_.providers_path());
    auto it = std::find_if(registered.begin(), registered.end(), [&](const auto& r) { return r.id == cfg.id; });
    if (it == registered.end()) registered.push_back(cfg);
    else *it = cfg;
    save_providers(config_.providers_path(), registered);
    return cfg;
  }

 private:
  ServiceConfig config_;
  std::optional<ObjectStore> store_;
  std::optional<ContentModel> model_;
};

void print_report(const std::string& id, const IngestReport& r, bool porcelain) {
  if (porcelain) {
    std::cout << "provider\t" << id << "\n"
              << "harvested\t" << r.harvested << "\n"
              << "created\t" << r.created << "\n"
              << "updated\t" << r.updated << "\n"
              << "deleted\t" << r.deleted << "\n"
              << "rejected\t" << r.rejected << "\n"
              << "complete\t" << (r.complete ? "true" : "false") << "\n";
    for (const auto& [identifier, reason] : r.rejects) std::cout << "reject\t" << identifier << "\t" << reason << "\n";
    if (!r.complete) std::cout << "error\t" << r.error << "\n";
    return;
  }
  std::cout << id << ": harvested " << r.harvested << ", created " << r.created << ", updated " << r.updated
            << ", deleted " << r.deleted << ", rejected " << r.rejected << "\n";
  for (const auto& [identifier, reason] : r.rejects) std::cout << "  rejected " << identifier << ": " << reason << "\n";
  if (!r.complete) std::cout << "  incomplete: " << r.error << "\n";
}

ProviderOptions provider_options(const ServiceConfig& c) {
  ProviderOptions o;
  o.repository_name = c.repository_name;
  o.base_url = c.oai_base_url();
  o.admin_email = c.admin_email;
  o.page_size = c.oai_page_size;
  return o;
}

// Harvests every provider whose next attempt is due, until told to stop.
class Scheduler {
 public:
  Scheduler(Repository& repo, std::chrono::seconds tick) : repo_(repo), tick_(tick) {
    thread_ = std::thread([this] { run(); });
  }
  ~Scheduler() {
    {
      std::lock_guard lock(mutex_);
      stop_ = true;
    }
    cv_.notify_all();
    thread_.join();
  }

 private:
  void run() {
    Harvester harvester(repo_.store());
    std::unique_lock lock(mutex_);
    while (!stop_) {
      lock.unlock();
      try {
        for (auto cfg : repo_.providers()) {
          auto state = harvester.state(cfg.id);
          if (state.next_attempt && repo_.store().now() < *state.next_attempt) continue;
          cfg = repo_.ensure_registered(harvester, cfg);
          print_report(cfg.id, harvester.harvest(cfg), false);
        }
      } catch (const std::exception& e) {
        std::cerr << "scheduler: " << e.what() << "\n";
      }
      lock.lock();
      cv_.wait_for(lock, tick_, [this] { return stop_; });
    }
  }

  Repository& repo_;
  std::chrono::seconds tick_;
  std::mutex mutex_;
  std::condition_variable cv_;
  bool stop_ = false;
  std::thread thread_;
};

int serve(Repository& repo, bool schedule, int tick_seconds, const Globals& g) {
  // Block the signals before any thread starts so only sigwait sees them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Provider provider(repo.model(), provider_options(repo.config()));
  Gateway gateway(repo.model(), provider, GatewayOptions{repo.config().query_row_cap});
  int port = gateway.bind(repo.config().host, repo.config().port);
  if (repo.config().base_url.empty()) {
    auto bound = repo.config();
    bound.port = port;
    provider.set_base_url(bound.oai_base_url());
  }
  gateway.start();
  if (g.porcelain) std::cout << "listening\t" << repo.config().host << "\t" << port << std::endl;
  else std::cout << "listening on http://" << repo.config().host << ":" << port << std::endl;

  std::optional<Scheduler> scheduler;
  if (schedule) scheduler.emplace(repo, std::chrono::seconds(tick_seconds));
  int received = 0;
  sigwait(&signals, &received);
  scheduler.reset();
  gateway.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Operator tool for the overlay repository"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "JSON service configuration");
  app.add_option("--data-dir", g.data_dir, "Directory holding repository.db and providers.json");
  app.add_flag("--porcelain", g.porcelain, "Tab-separated output, one record per line");

  auto* serve_cmd = app.add_subcommand("serve", "Serve /objects, /query and /oai over HTTP");
  std::string host;
  int port = -1;
  bool schedule = false;
  int tick = 60;
  serve_cmd->add_option("--host", host, "Listen address");
  serve_cmd->add_option("--port", port, "Listen port (0 picks a free one)")->check(CLI::Range(0, 65535));
  serve_cmd->add_flag("--schedule", schedule, "Run due harvests in the background");
  serve_cmd->add_option("--tick", tick, "Seconds between scheduler passes")->check(CLI::PositiveNumber);

  auto* register_cmd = app.add_subcommand("register-provider", "Register an OAI-PMH provider and provision its agent");
  ProviderConfig reg;
  std::optional<std::string> reg_set, reg_pattern;
  long hint_seconds = 86400;
  register_cmd->add_option("--id", reg.id, "Stable provider key")->required();
  register_cmd->add_option("--base-url", reg.base_url, "OAI-PMH base URL")->required();
  register_cmd->add_option("--set", reg_set, "setSpec to harvest");
  register_cmd->add_option("--format", reg.format, "metadataPrefix")->capture_default_str();
  register_cmd->add_option("--schedule-hint", hint_seconds, "Seconds between harvests")->check(CLI::PositiveNumber);
  register_cmd->add_option("--label", reg.label, "Brand label");
  register_cmd->add_option("--logo", reg.logo_url, "Brand logo URL");
  register_cmd->add_option("--resource-key-pattern", reg_pattern, "Regex selecting the identifier that keys resources");

  auto* harvest_cmd = app.add_subcommand("harvest", "Run one incremental harvest");
  std::string harvest_id;
  bool harvest_all = false;
  auto* provider_opt = harvest_cmd->add_option("--provider", harvest_id, "Provider id");
  harvest_cmd->add_flag("--all", harvest_all, "Harvest every registered provider")->excludes(provider_opt);

  auto* query_cmd = app.add_subcommand("query", "Evaluate a relationship query");
  std::string expression;
  std::optional<std::size_t> offset, limit;
  query_cmd->add_option("-e,--expression", expression, "select ?v where (...)")->required();
  query_cmd->add_option("--offset", offset, "Rows to skip");
  query_cmd->add_option("--limit", limit, "Maximum rows");

  auto* export_cmd = app.add_subcommand("export", "Print an object's canonical XML");
  std::string export_pid;
  export_cmd->add_option("--pid", export_pid, "Object id, e.g. nsdl:4")->required();

  auto* load_cmd = app.add_subcommand("load-fixture", "Import every *.xml object document under a directory");
  std::string fixture_dir;
  load_cmd->add_option("dir", fixture_dir, "Fixture directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    auto config = load_config(g.config_path);
    if (!g.data_dir.empty()) config.data_dir = g.data_dir;
    if (!host.empty()) config.host = host;
    if (port >= 0) config.port = port;
    Repository repo(config);

    if (*serve_cmd) return serve(repo, schedule, tick, g);

    if (*register_cmd) {
      if (reg_set) reg.set_spec = *reg_set;
      if (reg_pattern) reg.resource_key_pattern = *reg_pattern;
      reg.schedule_hint = std::chrono::seconds(hint_seconds);
      for (const auto& existing : load_providers(config.providers_path()))
        if (existing.id == reg.id) {
          reg.agent_pid = existing.agent_pid;
          reg.provider_role_pid = existing.provider_role_pid;
          reg.aggregator_role_pid = existing.aggregator_role_pid;
        }
      Harvester harvester(repo.store());
      auto cfg = repo.ensure_registered(harvester, reg);
      if (g.porcelain) {
        std::cout << "provider\t" << cfg.id << "\nagent\t" << cfg.agent_pid.str() << "\nprovider_role\t"
                  << cfg.provider_role_pid.str() << "\naggregator_role\t" << cfg.aggregator_role_pid.str() << "\n";
      } else {
        std::cout << "registered " << cfg.id << ": agent " << cfg.agent_pid.str() << ", provider role "
                  << cfg.provider_role_pid.str() << ", aggregator role " << cfg.aggregator_role_pid.str() << "\n";
      }
      return 0;
    }

    if (*harvest_cmd) {
      if (harvest_id.empty() && !harvest_all) throw Error(ErrorCode::invalid_argument, "pass --provider <id> or --all");
      Harvester harvester(repo.store());
      bool complete = true;
      bool found = false;
      for (auto cfg : repo.providers()) {
        if (!harvest_all && cfg.id != harvest_id) continue;
        found = true;
        cfg = repo.ensure_registered(harvester, cfg);
        auto report = harvester.harvest(cfg);
        print_report(cfg.id, report, g.porcelain);
        complete = complete && report.complete;
      }
      if (!found && !harvest_all) throw Error(ErrorCode::not_found, "no provider registered as " + harvest_id);
      return complete ? 0 : 2;
    }

    if (*query_cmd) {
      auto pattern = QueryPattern::parse(expression);
      auto rows = repo.store().query(pattern);
      const std::size_t first = std::min(offset.value_or(0), rows.size());
      const std::size_t last = std::min(rows.size(), first + std::min(limit.value_or(SIZE_MAX), rows.size() - first));
      if (!g.porcelain) {
        for (std::size_t i = 0; i < pattern.select.size(); ++i) std::cout << (i ? "\t?" : "?") << pattern.select[i];
        std::cout << "\n";
      }
      for (std::size_t r = first; r < last; ++r) {
        for (std::size_t i = 0; i < rows[r].size(); ++i) std::cout << (i ? "\t" : "") << to_string(rows[r][i]);
        std::cout << "\n";
      }
      if (!g.porcelain) std::cout << "(" << (last - first) << " of " << rows.size() << " rows)\n";
      return 0;
    }

    if (*export_cmd) {
      std::cout << repo.store().export_object(ObjectId::from_string(export_pid));
      return 0;
    }

    if (*load_cmd) {
      auto report = load_fixture_directory(repo.store(), fixture_dir);
      if (g.porcelain) {
        for (auto pid : report.imported) std::cout << "imported\t" << pid.str() << "\n";
        for (const auto& v : report.violations) std::cout << "violation\t" << v << "\n";
      } else {
        std::cout << "imported " << report.imported.size() << " objects from " << fixture_dir << "\n";
        for (const auto& v : report.violations) std::cout << "  violation: " << v << "\n";
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    for (const auto& d : e.details()) std::cerr << "  " << d << "\n";
    return is_user_error(e.code()) ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
