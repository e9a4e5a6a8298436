#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "logicloss/harness/cli.hpp"

using namespace logicloss::harness;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), "logicloss");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / "logicloss_cli_test") {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(path / name) << text;
    return (path / name).string();
  }
};

std::string line_starting(const std::string& text, const std::string& prefix) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (line.rfind(prefix, 0) == 0) return line;
  return {};
}

}  // namespace

TEST_CASE("compile reports the cnf and the closed-form cost") {
  TempDir tmp;
  const std::string f = tmp.write("three.lc", "(v.out[0] == 1) | (v.out[0] == 2) | (v.out[0] == 3)\n");
  const Result r = cli({"compile", "--constraint", f, "--state", "v=2.5"});
  CHECK(r.code == kExitOk);
  CHECK(line_starting(r.out, "closed_form_cost:") == "closed_form_cost: 0.5");
  CHECK(line_starting(r.out, "satisfied:") == "satisfied: false");
  CHECK(line_starting(r.out, "slots:") == "slots: v");

  const Result at = cli({"compile", "--constraint", f, "--state", "v=2"});
  CHECK(line_starting(at.out, "closed_form_cost:") == "closed_form_cost: 0");
  CHECK(line_starting(at.out, "satisfied:") == "satisfied: true");
}

TEST_CASE("bad arguments exit with the config code") {
  TempDir tmp;
  CHECK(cli({}).code == kExitConfig);
  CHECK(cli({"frobnicate"}).code == kExitConfig);
  CHECK(cli({"compile"}).code == kExitConfig);
  CHECK(cli({"compile", "--constraint", "/nonexistent.lc"}).code == kExitConfig);
  const std::string bad = tmp.write("bad.lc", "v.out[0] <=\n");
  const Result syntax = cli({"compile", "--constraint", bad});
  CHECK(syntax.code == kExitConfig);
  CHECK(syntax.err.find("error") != std::string::npos);
  const std::string ok = tmp.write("ok.lc", "v.out[0] <= 1\n");
  CHECK(cli({"compile", "--constraint", ok, "--state", "v=abc"}).code == kExitConfig);
  CHECK(cli({"compile", "--constraint", ok, "--state", "w=1"}).code == kExitConfig);
  CHECK(cli({"train", "--config", tmp.write("c.json", "{\"task\": \"shortcut\", \"bogus\": 1}")}).code ==
        kExitConfig);
  CHECK(cli({"train", "--config", tmp.write("d.json", "{not json")}).code == kExitConfig);
  CHECK(cli({"bench-encoders", "--example", "nope"}).code == kExitConfig);
  CHECK(cli({"--help"}).code == kExitOk);
}

TEST_CASE("grad-check passes") {
  const Result r = cli({"grad-check", "--points", "10"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("FAIL") == std::string::npos);
}

TEST_CASE("bench-encoders prints one row per encoder") {
  const Result two = cli({"bench-encoders", "--example", "appendix-c-2"});
  CHECK(two.code == kExitOk);
  CHECK(!line_starting(two.out, "dual").empty());
  CHECK(!line_starting(two.out, "dl2").empty());
  const Result one = cli({"bench-encoders", "--example", "appendix-c-1"});
  CHECK(one.code == kExitOk);
  CHECK(!line_starting(one.out, "fuzzy").empty());
}

TEST_CASE("gen-data writes json lines") {
  TempDir tmp;
  const std::string g = (tmp.path / "g.jsonl").string();
  CHECK(cli({"gen-data", "--task", "shortest_path", "--count", "5", "--n-vertices", "6", "--out", g}).code == kExitOk);
  std::ifstream in(g);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.at("n") == 6);
    ++n;
  }
  CHECK(n == 5);
  const std::string s = (tmp.path / "s.jsonl").string();
  CHECK(cli({"gen-data", "--task", "shortcut", "--count", "100", "--hide-labels", "--out", s}).code == kExitOk);
  CHECK(cli({"gen-data", "--task", "mnist", "--count", "1", "--out", s}).code == kExitConfig);
}

TEST_CASE("train then eval reproduces the final metrics") {
  TempDir tmp;
  const std::string data = (tmp.path / "train.jsonl").string();
  REQUIRE(cli({"gen-data", "--task", "shortcut", "--count", "200", "--seed", "4", "--out", data}).code == kExitOk);
  const std::string cfg = tmp.write(
      "cfg.json", "{\"task\": \"shortcut\", \"train\": {\"epochs\": 2},"
                  " \"data\": {\"train_file\": \"train.jsonl\", \"test_count\": 100}, \"out_dir\": \"run\"}");
  const Result t = cli({"train", "--config", cfg});
  REQUIRE(t.code == kExitOk);
  CHECK(fs::exists(tmp.path / "run" / "metrics.csv"));
  CHECK(fs::exists(tmp.path / "run" / "manifest.json"));
  const Result e = cli({"eval", "--config", cfg, "--checkpoint", (tmp.path / "run" / "checkpoint.txt").string()});
  REQUIRE(e.code == kExitOk);
  // the printed row after the header; mean_delta and dual_entropy belong to the training state
  auto model_columns = [](const std::string& out) {
    std::istringstream in(out);
    std::string header, line, cell;
    std::getline(in, header);
    std::getline(in, line);
    std::istringstream cells(line);
    std::vector<std::string> keep;
    while (std::getline(cells, cell, ',')) keep.push_back(cell);
    return std::vector<std::string>(keep.begin() + 1, keep.end() - 2);
  };
  CHECK(model_columns(e.out) == model_columns(t.out));
  CHECK(model_columns(t.out).size() == 7);
  CHECK(cli({"eval", "--config", cfg, "--checkpoint", "/nonexistent"}).code == kExitConfig);
}

TEST_CASE("installed binary exit codes") {
  const char* bin = std::getenv("LOGICLOSS_BIN");
  if (bin == nullptr) return;
  auto status = [&](const std::string& args) {
    const int s = std::system((std::string(bin) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  CHECK(status("--help") == kExitOk);
  CHECK(status("compile") == kExitConfig);
  CHECK(status("bench-encoders --example appendix-c-2") == kExitOk);
}
