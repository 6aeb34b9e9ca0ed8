#include "overlay/gateway.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "overlay/digital_object.hpp"
#include "overlay/xml.hpp"

namespace overlay {

// ---------------------------------------------------------------------------
// Configuration

std::string ServiceConfig::database_path() const { return (std::filesystem::path(data_dir) / "repository.db").string(); }
std::string ServiceConfig::providers_path() const {
  return (std::filesystem::path(data_dir) / "providers.json").string();
}
std::string ServiceConfig::oai_base_url() const {
  if (!base_url.empty()) return base_url;
  return "http://" + host + ":" + std::to_string(port) + "/oai";
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

namespace {

template <typename T>
T parse_number(const std::string& name, const std::string& text) {
  T value{};
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || p != text.data() + text.size())
    throw Error(ErrorCode::invalid_argument, name + " must be a non-negative integer, got '" + text + "'");
  return value;
}

}  // namespace

ServiceConfig load_config(const std::string& path, const EnvLookup& env) {
  ServiceConfig c;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::invalid_argument, "cannot read config " + path);
    nlohmann::json j;
    try {
      in >> j;
      c.host = j.value("host", c.host);
      c.port = j.value("port", c.port);
      c.data_dir = j.value("data_dir", c.data_dir);
      c.handle_prefix = j.value("handle_prefix", c.handle_prefix);
      c.repository_name = j.value("repository_name", c.repository_name);
      c.admin_email = j.value("admin_email", c.admin_email);
      c.base_url = j.value("base_url", c.base_url);
      c.oai_page_size = j.value("oai_page_size", c.oai_page_size);
      c.member_page_size = j.value("member_page_size", c.member_page_size);
      c.query_row_cap = j.value("query_row_cap", c.query_row_cap);
      if (j.contains("providers")) c.providers = j.at("providers").get<std::vector<ProviderConfig>>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::invalid_argument, "bad config " + path + ": " + e.what());
    }
  }
  auto str = [&](const char* name, std::string& field) {
    if (auto v = env(name)) field = *v;
  };
  auto num = [&](const char* name, auto& field) {
    if (auto v = env(name)) field = parse_number<std::decay_t<decltype(field)>>(name, *v);
  };
  str("OVERLAY_HOST", c.host);
  num("OVERLAY_PORT", c.port);
  str("OVERLAY_DATA_DIR", c.data_dir);
  str("OVERLAY_HANDLE_PREFIX", c.handle_prefix);
  str("OVERLAY_REPOSITORY_NAME", c.repository_name);
  str("OVERLAY_ADMIN_EMAIL", c.admin_email);
  str("OVERLAY_BASE_URL", c.base_url);
  num("OVERLAY_OAI_PAGE_SIZE", c.oai_page_size);
  num("OVERLAY_MEMBER_PAGE_SIZE", c.member_page_size);
  num("OVERLAY_QUERY_ROW_CAP", c.query_row_cap);
  if (c.port < 0 || c.port > 65535) throw Error(ErrorCode::invalid_argument, "port out of range");
  if (c.oai_page_size == 0) throw Error(ErrorCode::invalid_argument, "oai_page_size must be positive");
  return c;
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::not_found:
    case ErrorCode::not_available:
    case ErrorCode::brand_missing:
    case ErrorCode::not_represented:
    case ErrorCode::no_metadata:
      return 404;
    case ErrorCode::gone:
      return 410;
    case ErrorCode::invalid_argument:
    case ErrorCode::parse_error:
      return 400;
    case ErrorCode::validation:
      return 422;
    case ErrorCode::conflict:
    case ErrorCode::model_integrity:
      return 409;
    case ErrorCode::operation_not_supported:
      return 501;
    case ErrorCode::format_unavailable:
      return 406;
    case ErrorCode::dissemination:
      return 502;
    case ErrorCode::storage:
      return 500;
  }
  return 500;
}

// ---------------------------------------------------------------------------
// HTTP

namespace {

constexpr const char* kText = "text/plain; charset=utf-8";
constexpr const char* kXml = "text/xml; charset=utf-8";
constexpr const char* kTsv = "text/tab-separated-values; charset=utf-8";

// First line is "<code>: <message>", then one line per violation.
void fail(httplib::Response& res, const Error& e) {
  std::string body = std::string(to_string(e.code())) + ": " + e.what() + "\n";
  for (const auto& d : e.details()) body += d + "\n";
  res.status = http_status(e.code());
  res.set_content(body, kText);
}

std::optional<std::size_t> size_param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  return parse_number<std::size_t>(name, req.get_param_value(name));
}

/// Gives the document a fresh pid when it carries none, defaulting the
/// version and datestamp an import needs.
std::string with_minted_pid(std::string_view body, ObjectStore& store) {
  auto root = xml::parse(body);
  auto pid = root.attribute("pid");
  if (pid && !pid->empty() && *pid != "new") return std::string(body);
  root.set_attribute("pid", store.mint_pid().str());
  if (!root.attribute("state")) root.set_attribute("state", "active");
  if (!root.attribute("version")) root.set_attribute("version", "1");
  if (!root.attribute("lastModified")) root.set_attribute("lastModified", format_timestamp(store.now()));
  return xml::canonical(root);
}

}  // namespace

struct Gateway::Impl {
  ContentModel& model;
  ObjectStore& store;
  Provider& provider;
  GatewayOptions options;
  httplib::Server server;
  std::thread thread;
  std::mutex mutex;
  std::condition_variable stopped_cv;
  bool stopped = false;

  Impl(ContentModel& m, Provider& p, GatewayOptions o) : model(m), store(m.store()), provider(p), options(o) {
    routes();
  }

  // Wraps a handler so repository errors become status codes.
  template <typename F>
  httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const Error& e) {
        fail(res, e);
      } catch (const std::exception& e) {
        fail(res, Error(ErrorCode::storage, e.what()));
      }
    };
  }

  void routes() {
    server.Get("/objects", guarded([this](const auto& req, auto& res) { list_objects(req, res); }));
    server.Post("/objects", guarded([this](const auto& req, auto& res) { create(req, res); }));
    server.Get(R"(/objects/([^/]+))", guarded([this](const auto& req, auto& res) { get_object(req, res); }));
    server.Put(R"(/objects/([^/]+))", guarded([this](const auto& req, auto& res) { replace(req, res); }));
    server.Delete(R"(/objects/([^/]+))", guarded([this](const auto& req, auto& res) { remove(req, res); }));
    server.Get(R"(/objects/([^/]+)/methods/([^/]+))",
               guarded([this](const auto& req, auto& res) { disseminate(req, res); }));
    server.Get("/query", guarded([this](const auto& req, auto& res) { query(req, res); }));
    server.Post("/query", guarded([this](const auto& req, auto& res) { query(req, res); }));
    server.Get("/oai", guarded([this](const auto& req, auto& res) { oai(req, res); }));
    server.Post("/oai", guarded([this](const auto& req, auto& res) { oai(req, res); }));
  }

  void list_objects(const httplib::Request& req, httplib::Response& res) {
    const bool all = req.has_param("state") && req.get_param_value("state") == "all";
    std::string body;
    auto v = store.view();
    for (const auto& [pid, obj] : v.objects())
      if (all || obj->active()) body += pid.str() + "\n";
    res.set_content(body, kText);
  }

  void get_object(const httplib::Request& req, httplib::Response& res) {
    auto pid = ObjectId::from_string(req.matches[1].str());
    if (req.has_param("view") && req.get_param_value("view") == "export") {
      res.set_content(store.export_object(pid), kXml);
      return;
    }
    if (req.has_param("view")) throw Error(ErrorCode::invalid_argument, "unknown view " + req.get_param_value("view"));
    auto rep = store.resolve(RepresentationUri{pid, std::nullopt, {}});
    res.set_content(rep.bytes, rep.media_type);
  }

  void disseminate(const httplib::Request& req, httplib::Response& res) {
    RepresentationUri uri;
    uri.pid = ObjectId::from_string(req.matches[1].str());
    uri.op = req.matches[2].str();
    for (const auto& [k, v] : req.params) uri.params.emplace(k, v);
    auto rep = store.resolve(uri);
    res.set_content(rep.bytes, rep.media_type);
  }

  void create(const httplib::Request& req, httplib::Response& res) {
    auto document = with_minted_pid(req.body, store);
    auto pid = import_xml(document).pid;
    if (store.view().find(pid)) throw Error(ErrorCode::conflict, pid.str() + " already exists; use PUT");
    store.import_object(document);
    res.status = 201;
    res.set_header("Location", "/objects/" + pid.str());
    res.set_content(pid.str() + "\n", kText);
  }

  void replace(const httplib::Request& req, httplib::Response& res) {
    auto pid = ObjectId::from_string(req.matches[1].str());
    auto body_pid = import_xml(req.body).pid;
    if (body_pid != pid)
      throw Error(ErrorCode::conflict, "path names " + pid.str() + " but the body describes " + body_pid.str());
    const bool existed = static_cast<bool>(store.view().find(pid));
    store.import_object(req.body);
    res.status = existed ? 200 : 201;
    res.set_content(pid.str() + " version " + std::to_string(store.get_object(pid).version) + "\n", kText);
  }

  void remove(const httplib::Request& req, httplib::Response& res) {
    auto pid = ObjectId::from_string(req.matches[1].str());
    if (auto obj = store.view().find(pid); obj && !obj->active())
      throw Error(ErrorCode::gone, pid.str() + " has been deleted");
    store.delete_object(pid);
    res.set_content(pid.str() + " deleted\n", kText);
  }

  void query(const httplib::Request& req, httplib::Response& res) {
    std::string text;
    if (req.has_param("q")) text = req.get_param_value("q");
    else if (req.method == "POST") text = req.body;
    if (text.find_first_not_of(" \t\r\n") == std::string::npos)
      throw Error(ErrorCode::invalid_argument, "empty query; POST the pattern or pass q=");
    auto pattern = QueryPattern::parse(text);
    auto offset = size_param(req, "offset");
    auto limit = size_param(req, "limit");
    auto rows = store.query(pattern);
    if (!offset && !limit && rows.size() > options.query_row_cap) {
      res.status = 413;
      res.set_content("result has " + std::to_string(rows.size()) + " rows, over the cap of " +
                          std::to_string(options.query_row_cap) + "; page with offset and limit\n",
                      kText);
      return;
    }
    const std::size_t first = std::min(offset.value_or(0), rows.size());
    const std::size_t last = std::min(rows.size(), first + std::min(limit.value_or(SIZE_MAX), rows.size() - first));
    std::string body;
    for (std::size_t i = 0; i < pattern.select.size(); ++i) body += (i ? "\t?" : "?") + pattern.select[i];
    body += "\n";
    for (std::size_t r = first; r < last; ++r) {
      for (std::size_t i = 0; i < rows[r].size(); ++i) body += (i ? "\t" : "") + to_string(rows[r][i]);
      body += "\n";
    }
    res.set_header("X-Total-Rows", std::to_string(rows.size()));
    res.set_content(body, kTsv);
  }

  void oai(const httplib::Request& req, httplib::Response& res) {
    OaiArgs args(req.params.begin(), req.params.end());
    res.set_content(provider.handle(args), kXml);
  }
};

Gateway::Gateway(ContentModel& model, Provider& provider, GatewayOptions options)
    : impl_(std::make_unique<Impl>(model, provider, options)) {}

Gateway::~Gateway() { stop(); }

int Gateway::bind(const std::string& host, int port) {
  int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorCode::storage, "cannot listen on " + host + ":" + std::to_string(port));
  return bound;
}

void Gateway::start() {
  impl_->thread = std::thread([this] {
    impl_->server.listen_after_bind();
    std::lock_guard lock(impl_->mutex);
    impl_->stopped = true;
    impl_->stopped_cv.notify_all();
  });
  impl_->server.wait_until_ready();
}

void Gateway::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

void Gateway::wait() {
  std::unique_lock lock(impl_->mutex);
  impl_->stopped_cv.wait(lock, [this] { return impl_->stopped; });
}

}  // namespace overlay
