#include <doctest.h>

#include <httplib.h>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <filesystem>
#include <sys/wait.h>
#include <unistd.h>

#include "builders.hpp"
#include "overlay/gateway.hpp"
#include "seed.hpp"

using namespace overlay;
using namespace overlay::testing;
namespace fs = std::filesystem;

namespace {

struct Run {
  int status;
  std::string out;
};

std::string quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return out + "'";
}

Run ctl(const std::vector<std::string>& args) {
  std::string cmd = quote(OVERLAY_CTL);
  for (const auto& a : args) cmd += " " + quote(a);
  cmd += " 2>/dev/null";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe);
  std::string out;
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, pipe)) > 0;) out.append(buf, n);
  int status = ::pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

struct TempDir {
  fs::path path;
  TempDir() {
    static int n = 0;
    path = fs::temp_directory_path() / ("overlayctl-" + std::to_string(::getpid()) + "-" + std::to_string(++n));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

std::map<std::string, std::string> fields(const std::string& porcelain) {
  std::map<std::string, std::string> out;
  std::istringstream in(porcelain);
  for (std::string line; std::getline(in, line);) {
    auto tab = line.find('\t');
    if (tab != std::string::npos) out.emplace(line.substr(0, tab), line.substr(tab + 1));
  }
  return out;
}

}  // namespace

TEST_CASE("cli: usage errors exit 1") {
  CHECK(ctl({}).status == 1);
  CHECK(ctl({"bogus"}).status == 1);
  CHECK(ctl({"export"}).status == 1);
  CHECK(ctl({"--help"}).status == 0);
  TempDir d;
  CHECK(ctl({"--data-dir", d.str(), "export", "--pid", "nsdl:9"}).status == 1);
  CHECK(ctl({"--data-dir", d.str(), "export", "--pid", "banana"}).status == 1);
  CHECK(ctl({"--data-dir", d.str(), "query", "-e", "select where"}).status == 1);
  CHECK(ctl({"--data-dir", d.str(), "harvest", "--provider", "nobody"}).status == 1);
  CHECK(ctl({"--data-dir", d.str(), "load-fixture", (d.path / "missing").string()}).status == 1);
  CHECK(ctl({"--config", (d.path / "missing.json").string(), "export", "--pid", "nsdl:1"}).status == 1);
}

TEST_CASE("cli: system errors exit 2") {
  TempDir d;
  auto file = d.path / "plain-file";
  { std::ofstream(file) << "x"; }
  CHECK(ctl({"--data-dir", file.string(), "export", "--pid", "nsdl:1"}).status == 2);
}

TEST_CASE("cli: load-fixture then query gives the figure 4 membership") {
  TempDir d;
  auto load = ctl({"--data-dir", d.str(), "--porcelain", "load-fixture", OVERLAY_FIXTURE_DIR});
  REQUIRE(load.status == 0);
  CHECK(load.out.find("imported\tnsdl:12\n") != std::string::npos);
  CHECK(load.out.find("violation") == std::string::npos);

  auto q = ctl({"--data-dir", d.str(), "--porcelain", "query", "-e",
                "select ?m where (?m <rel:memberOf> <info:nsdl/nsdl:12>)"});
  CHECK(q.status == 0);
  CHECK(q.out == "nsdl:16\nnsdl:18\n");
  auto page = ctl({"--data-dir", d.str(), "--porcelain", "query", "-e",
                   "select ?m where (?m <rel:memberOf> <info:nsdl/nsdl:12>)", "--offset", "1"});
  CHECK(page.out == "nsdl:18\n");

  auto exported = ctl({"--data-dir", d.str(), "export", "--pid", "nsdl:4"});
  CHECK(exported.status == 0);
  ObjectStore store{StoreOptions{(d.path / "repository.db").string()}};
  CHECK(exported.out == store.export_object(pid(4)));
}

TEST_CASE("cli: register-provider and harvest against a live provider") {
  ManualClock clock;
  ObjectStore source{StoreOptions{"", "2200", clock.clock()}};
  ContentModel model{source};
  auto seeded = seed_repository(source, clock, 30, 2);
  source.delete_object(seeded.metadata[3]);
  Provider provider{model};
  provider.set_page_size(7);
  Gateway gateway{model, provider};
  const int port = gateway.start("127.0.0.1", 0);
  const std::string base = "http://127.0.0.1:" + std::to_string(port) + "/oai";

  TempDir d;
  auto reg = ctl({"--data-dir", d.str(), "--porcelain", "register-provider", "--id", "seed", "--base-url", base,
                  "--label", "Seed Mirror"});
  REQUIRE(reg.status == 0);
  auto ids = fields(reg.out);
  CHECK(ids["provider"] == "seed");
  CHECK(ids["agent"] == "nsdl:1");
  CHECK(fs::exists(d.path / "providers.json"));

  auto first = ctl({"--data-dir", d.str(), "--porcelain", "harvest", "--provider", "seed"});
  REQUIRE(first.status == 0);
  auto r = fields(first.out);
  CHECK(r["harvested"] == "30");
  CHECK(r["created"] == "29");
  CHECK(r["deleted"] == "1");  // deleted headers are counted as received
  CHECK(r["rejected"] == "0");
  CHECK(r["complete"] == "true");

  auto second = ctl({"--data-dir", d.str(), "--porcelain", "harvest", "--provider", "seed"});
  CHECK(fields(second.out)["harvested"] == "0");

  // Re-registering keeps the provisioned pids.
  auto again = ctl({"--data-dir", d.str(), "--porcelain", "register-provider", "--id", "seed", "--base-url", base});
  CHECK(fields(again.out)["agent"] == "nsdl:1");

  gateway.stop();
  auto down = ctl({"--data-dir", d.str(), "--porcelain", "harvest", "--all"});
  CHECK(down.status == 2);
  CHECK(fields(down.out)["complete"] == "false");
}

TEST_CASE("cli: serve exposes the repository until SIGTERM") {
  TempDir d;
  REQUIRE(ctl({"--data-dir", d.str(), "load-fixture", OVERLAY_FIXTURE_DIR}).status == 0);

  int fds[2];
  REQUIRE(::pipe(fds) == 0);
  pid_t child = ::fork();
  REQUIRE(child >= 0);
  if (child == 0) {
    ::dup2(fds[1], STDOUT_FILENO);
    ::close(fds[0]);
    ::execl(OVERLAY_CTL, OVERLAY_CTL, "--data-dir", d.str().c_str(), "--porcelain", "serve", "--port", "0",
            static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(fds[1]);
  std::string line;
  for (char c; ::read(fds[0], &c, 1) == 1 && c != '\n';) line += c;
  ::close(fds[0]);
  auto last_tab = line.rfind('\t');
  REQUIRE(line.starts_with("listening\t"));
  const int port = std::stoi(line.substr(last_tab + 1));

  httplib::Client client("127.0.0.1", port);
  auto res = client.Get("/objects/nsdl:1/methods/getMetadata");
  REQUIRE(res);
  CHECK(res->body == "nsdl:4\n");
  auto oai = client.Get("/oai?verb=Identify");
  REQUIRE(oai);
  CHECK(error_code(oai->body).empty());
  CHECK(oai->body.find("<baseURL>http://127.0.0.1:" + std::to_string(port) + "/oai</baseURL>") != std::string::npos);

  ::kill(child, SIGTERM);
  int status = 0;
  ::waitpid(child, &status, 0);
  CHECK(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == 0);
}
