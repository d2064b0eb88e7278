#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "json.hpp"
#include "logex/cli.hpp"
#include "logex/core.hpp"
#include "logex/learner.hpp"
#include "logex/util.hpp"
#include "test_support.hpp"

using namespace logex;
using logex::testing::DataFile;
using logex::testing::TempDir;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result Cli(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::Run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> Lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

int RunBinary(const std::string& args) {
  const int status = std::system((std::string(LOGEX_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("fit writes the table and a manifest") {
  TempDir dir("fit");
  const auto r = Cli({"fit", "--events", DataFile("fixture_events.tsv"), "--out", dir / "table.tsv"});
  REQUIRE(r.code == 0);
  const auto table = ReadFile(dir / "table.tsv");
  CHECK(table.find("p1\tad1\t3\t4\n") != std::string::npos);
  CHECK(table.find("p1\tad2\t1\t4\n") != std::string::npos);

  const auto manifest = nlohmann::json::parse(ReadFile(dir / "table.tsv.manifest.json"));
  CHECK(manifest["command"] == "fit");
  CHECK(manifest["config"]["scope"] == "all");
  CHECK(manifest["inputs"]["events"]["sha256"] == Sha256Hex(ReadFile(DataFile("fixture_events.tsv"))));
  CHECK(manifest["outputs"]["table"]["sha256"] == Sha256Hex(table));
  CHECK(manifest.contains("wall_clock_seconds"));

  REQUIRE(Cli({"fit", "--events", DataFile("fixture_events.tsv"), "--out", dir / "again.tsv"}).code == 0);
  const auto second = nlohmann::json::parse(ReadFile(dir / "again.tsv.manifest.json"));
  CHECK(second["outputs"]["table"]["sha256"] == manifest["outputs"]["table"]["sha256"]);
  CHECK_FALSE(std::filesystem::exists(dir / "table.tsv.tmp"));
}

TEST_CASE("fit scopes need a split marker") {
  const auto r = Cli({"fit", "--events", DataFile("fixture_events.tsv"), "--scope", "split"});
  CHECK(r.code == cli::kExitUsage);
  CHECK(r.err.find("#!split") != std::string::npos);
  CHECK(Cli({"fit", "--events", DataFile("fixture_events.tsv"), "--scope", "sideways"}).code == cli::kExitUsage);

  TempDir dir("scopes");
  WriteFileAtomic(dir / "ev.tsv", "x\ta\t1\t\nx\ta\t0\t\n#!split\nx\tb\t1\t\n");
  const auto split = Cli({"fit", "--events", dir / "ev.tsv", "--scope", "split", "--out", dir / "eval.tsv",
                          "--train-out", dir / "train.tsv"});
  REQUIRE(split.code == 0);
  CHECK(ReadFile(dir / "eval.tsv").find("x\tb\t1\t1\n") != std::string::npos);
  CHECK(ReadFile(dir / "train.tsv").find("x\ta\t2\t2\n") != std::string::npos);
}

TEST_CASE("data errors") {
  TempDir dir("errors");
  WriteFileAtomic(dir / "bad.tsv", "x\ta\t1\t\nx\ta\t7\t\n");
  const auto bad = Cli({"fit", "--events", dir / "bad.tsv"});
  CHECK(bad.code == cli::kExitFormat);
  CHECK(bad.err.find("line 2") != std::string::npos);
  CHECK(Cli({"fit", "--events", dir / "missing.tsv"}).code == cli::kExitFormat);
  WriteFileAtomic(dir / "empty.tsv", "# nothing\n");
  CHECK(Cli({"fit", "--events", dir / "empty.tsv"}).code == cli::kExitNumeric);
}

TEST_CASE("evaluate report rows") {
  TempDir dir("evaluate");
  const auto r = Cli({"evaluate", "--events", DataFile("fixture_events.tsv"), "--policy", "random", "--tau", "0.05",
                      "--out", dir / "report.tsv"});
  REQUIRE(r.code == 0);
  const auto lines = Lines(r.out);
  REQUIRE(lines.size() == 2);
  CHECK(lines[0] == "Method\ttau\tdelta\tT\tEstimate\tInterval");
  CHECK(lines[1].rfind("Random\t0.05\t0.05\t4\t", 0) == 0);
  // (1 * 4/3 / 2) * 2 / 4 with |C| = 2.
  CHECK(lines[1].find("\t0.333333\t") != std::string::npos);
  CHECK(ReadFile(dir / "report.tsv") == r.out);
  CHECK(std::filesystem::exists(dir / "report.tsv.manifest.json"));

  CHECK(Cli({"evaluate", "--events", DataFile("fixture_events.tsv"), "--policy", "random", "--tau", "0"}).code ==
        cli::kExitUsage);
  CHECK(Cli({"evaluate", "--events", DataFile("fixture_events.tsv"), "--policy", "random", "--tau", "1.5"}).code ==
        cli::kExitUsage);
  CHECK(Cli({"evaluate", "--events", DataFile("fixture_events.tsv"), "--policy", "random", "--delta", "1"}).code ==
        cli::kExitUsage);
  CHECK(Cli({"evaluate", "--events", DataFile("fixture_events.tsv")}).code == cli::kExitUsage);
}

TEST_CASE("evaluate a policy that never matches the log") {
  TempDir dir("never");
  // Naive model that strongly prefers an ad absent from the log.
  const auto context = ParseFeatures("\"apple\":0.5,\"green\":0.5");
  const auto ghost = ParseFeatures("\"ghost\":1");
  ModelFile model;
  model.kind = PolicyKind::kNaive;
  const auto crossed = CrossFeatures(context, ghost);
  for (const auto& e : crossed.entries()) model.model.weights[e.id] = 5.0;
  WriteFileAtomic(dir / "ghost.model", SerializeModel(model));
  WriteFileAtomic(dir / "catalog.tsv", "ghost\t\"ghost\":1\n");

  const auto r = Cli({"evaluate", "--events", DataFile("fixture_events.tsv"), "--catalog", dir / "catalog.tsv",
                      "--policy", dir / "ghost.model", "--tau", "0.1", "--delta", "0.05"});
  REQUIRE(r.code == 0);
  const auto lines = Lines(r.out);
  REQUIRE(lines.size() == 2);
  char expected[64];
  std::snprintf(expected, sizeof(expected), "\t0.000000\t[0.000000,%.6f]",
                (1.0 - std::pow(0.025, 1.0 / 4.0)) / 0.1);
  CHECK(lines[1].rfind("Naive\t0.1\t0.05\t4", 0) == 0);
  CHECK(lines[1].find(expected) != std::string::npos);
}

TEST_CASE("train sweeps five rates") {
  TempDir dir("train");
  const auto r = Cli({"train", "--events", DataFile("fixture_events.tsv"), "--out", dir / "m.model", "--seed", "5"});
  REQUIRE(r.code == 0);
  const auto lines = Lines(r.out);
  REQUIRE(lines.size() == 6);
  for (int i = 0; i < 5; ++i) CHECK(lines[static_cast<std::size_t>(i)].rfind("candidate\t", 0) == 0);
  CHECK(lines[5].rfind("selected\t", 0) == 0);
  const auto model = ReadModel(dir / "m.model");
  CHECK(model.kind == PolicyKind::kLearned);
  CHECK(model.seed == 5);
  CHECK(std::filesystem::exists(dir / "m.model.manifest.json"));

  const auto naive = Cli({"train", "--events", DataFile("fixture_events.tsv"), "--naive", "--out", dir / "n.model"});
  REQUIRE(naive.code == 0);
  CHECK(ReadModel(dir / "n.model").kind == PolicyKind::kNaive);
  CHECK_FALSE(ReadModel(dir / "n.model").weighted);

  CHECK(Cli({"train", "--events", DataFile("fixture_events.tsv"), "--out", dir / "x.model", "--learning-rates",
             "1e200,1e300"})
            .code == cli::kExitNumeric);
  CHECK(Cli({"train", "--events", DataFile("fixture_events.tsv"), "--out", dir / "x.model", "--passes", "0"}).code ==
        cli::kExitUsage);
}

TEST_CASE("act picks the best candidate") {
  TempDir dir("act");
  const auto context = ParseFeatures("\"apple\":1");
  ModelFile model;
  const auto ipod = CrossFeatures(context, ParseFeatures("\"ipod\":1"));
  const auto case_ad = CrossFeatures(context, ParseFeatures("\"case\":1"));
  for (const auto& e : ipod.entries()) model.model.weights[e.id] = 0.7;
  for (const auto& e : case_ad.entries()) model.model.weights[e.id] = 0.3;
  WriteFileAtomic(dir / "m.model", SerializeModel(model));
  WriteFileAtomic(dir / "cands.tsv", "case\t\"case\":1\nipod\t\"ipod\":1\n");
  const auto r = Cli({"act", "--model", dir / "m.model", "--context", "\"apple\":1", "--candidates", dir / "cands.tsv"});
  REQUIRE(r.code == 0);
  CHECK(Lines(r.out).back() == "chosen\tipod");
  WriteFileAtomic(dir / "none.tsv", "");
  CHECK(Cli({"act", "--model", dir / "m.model", "--context", "\"apple\":1", "--candidates", dir / "none.tsv"}).code ==
        cli::kExitNumeric);
}

TEST_CASE("simulate") {
  TempDir dir("simulate");
  const std::vector<std::string> base{"simulate", "--world", DataFile("warmstart_world.txt"), "--policies",
                                      DataFile("warmstart_policies.txt"), "--seed", "11"};
  auto args = base;
  args.insert(args.end(), {"--rounds", "0"});
  CHECK(Cli(args).code == cli::kExitUsage);

  args = base;
  args.insert(args.end(), {"--rounds", "2000", "--split", "1000", "--out", dir / "a.tsv", "--catalog-out",
                           dir / "cat.tsv"});
  REQUIRE(Cli(args).code == 0);
  args = base;
  args.insert(args.end(), {"--rounds", "2000", "--split", "1000", "--out", dir / "b.tsv"});
  REQUIRE(Cli(args).code == 0);
  CHECK(ReadFile(dir / "a.tsv") == ReadFile(dir / "b.tsv"));
  const auto data = ReadEvents(dir / "a.tsv");
  CHECK(data.size() == 2000);
  CHECK(data.split_index() == 1000);
  CHECK(ReadCatalog(dir / "cat.tsv").size() == 6);

  args = base;
  args.insert(args.end(), {"--rounds", "10", "--split", "11"});
  CHECK(Cli(args).code == cli::kExitUsage);
}

TEST_CASE("pipeline closure on shipped files") {
  TempDir dir("pipeline");
  REQUIRE(Cli({"simulate", "--world", DataFile("warmstart_world.txt"), "--policies", DataFile("warmstart_policies.txt"),
               "--rounds", "20000", "--split", "10000", "--seed", "3", "--out", dir / "ev.tsv", "--catalog-out",
               dir / "cat.tsv"})
              .code == 0);
  REQUIRE(Cli({"fit", "--events", dir / "ev.tsv", "--out", dir / "table.tsv"}).code == 0);
  REQUIRE(Cli({"train", "--events", dir / "ev.tsv", "--table", dir / "table.tsv", "--learning-rates",
               "0.005,0.002,0.001,0.0005,0.0002", "--out", dir / "learned.model"})
              .code == 0);
  REQUIRE(Cli({"train", "--events", dir / "ev.tsv", "--catalog", dir / "cat.tsv", "--naive", "--learning-rates",
               "0.005,0.002,0.001,0.0005,0.0002", "--out", dir / "naive.model"})
              .code == 0);
  const auto r = Cli({"evaluate", "--events", dir / "ev.tsv", "--catalog", dir / "cat.tsv", "--table",
                      dir / "table.tsv", "--policy", dir / "learned.model", "--policy", "random", "--policy",
                      dir / "naive.model", "--tau", "0.05,0.01"});
  REQUIRE(r.code == 0);
  const auto lines = Lines(r.out);
  REQUIRE(lines.size() == 7);
  CHECK(lines[1].rfind("Learned\t0.05\t0.05\t10000\t", 0) == 0);
  CHECK(lines[2].rfind("Random\t0.05", 0) == 0);
  CHECK(lines[3].rfind("Naive\t0.05", 0) == 0);
  CHECK(lines[4].rfind("Learned\t0.01", 0) == 0);
}

TEST_CASE("binary exit codes") {
  CHECK(RunBinary("--help") == 0);
  CHECK(RunBinary("") == cli::kExitUsage);
  CHECK(RunBinary("fit") == cli::kExitUsage);
  CHECK(RunBinary("fit --events /nonexistent/file") == cli::kExitFormat);
  CHECK(RunBinary("evaluate --events " + DataFile("fixture_events.tsv") + " --policy random --tau -1") ==
        cli::kExitUsage);
  CHECK(RunBinary("fit --events " + DataFile("fixture_events.tsv")) == 0);
}
