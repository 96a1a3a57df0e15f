#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include <unistd.h>

#include <json.hpp>

#include "graphflow/cli.hpp"
#include "graphflow/kg_store.hpp"

using namespace graphflow;
namespace fs = std::filesystem;

namespace {

const fs::path kGolden = fs::path(GRAPHFLOW_GOLDEN_DIR);

struct Run {
  int code = 0;
  std::string out;
  std::string err;

  nlohmann::json manifest() const { return nlohmann::json::parse(out); }
  nlohmann::json error() const { return nlohmann::json::parse(err.substr(err.rfind("{\"error\""))); }
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("graphflow_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
  static int& counter() {
    static int n = 0;
    return n;
  }
};

}  // namespace

TEST_CASE("gradcheck on chain-3") {
  const Run r = run({"gradcheck", "--fixture", "chain-3", "--hidden", "16,16"});
  REQUIRE(r.code == 0);
  CHECK(r.err.find("max rel err") != std::string::npos);
  const auto m = r.manifest();
  CHECK(m["command"] == "gradcheck");
  CHECK(m["result"]["max_rel_error"].get<double>() <= 1e-4);
  for (const char* o : {"dble", "tb", "subtb", "sft", "prm"}) {
    CHECK(m["result"][o]["checked"].get<int>() >= 100);
  }
}

TEST_CASE("train with zero epochs, then retrieve and eval") {
  const TempDir dir;
  REQUIRE(run({"gen", "--fixture", "star-2-targets", "--out-dir", dir.path.string()}).code == 0);
  const std::string graph = dir / "graph.jsonl";
  const std::string queries = dir / "queries.jsonl";
  CHECK(fs::exists(graph));

  const Run train = run({"train", "--graph", graph, "--queries", queries, "--epochs", "0",
                         "--out", dir / "ck.json", "--log", dir / "log.csv", "--seed", "3"});
  REQUIRE(train.code == 0);
  const auto tm = train.manifest();
  CHECK(tm["seed"] == 3);
  CHECK(tm["outputs"].contains("checkpoint"));
  CHECK(tm["digests"].size() >= 2);

  for (const char* rerank : {"off", "on"}) {
    const Run ret = run({"retrieve", "--checkpoint", dir / "ck.json", "--graph", graph,
                         "--queries", queries, "--out", dir / "res.jsonl", "--rerank", rerank});
    REQUIRE(ret.code == 0);
    const Run ev = run({"eval", "--results", dir / "res.jsonl", "--graph", graph, "--queries",
                        queries, "--out", dir / "rep.csv", "--json", dir / "rep.json"});
    REQUIRE(ev.code == 0);
    CHECK(read_file(dir / "rep.csv").rfind("qid,num_targets,bin,", 0) == 0);
    CHECK(nlohmann::json::parse(read_file(dir / "rep.json"))["rows"].size() == 1);
  }
  const std::string line = read_file(dir / "res.jsonl");
  CHECK(nlohmann::json::parse(line)["rerank_applied"] == true);
  CHECK(nlohmann::json::parse(line)["samples"].size() == 20);
}

TEST_CASE("eval reproduces the hand-computed golden CSV") {
  const TempDir dir;
  const fs::path g = kGolden / "metrics_3q";
  const Run r = run({"eval", "--results", (g / "results.jsonl").string(), "--graph",
                     (g / "graph.jsonl").string(), "--queries", (g / "queries.jsonl").string(),
                     "--out", dir / "rep.csv", "--jobs", "2"});
  REQUIRE(r.code == 0);
  CHECK(read_file(dir / "rep.csv") == read_file(g / "expected.csv"));
}

TEST_CASE("retrieve output does not depend on --jobs") {
  const TempDir dir;
  REQUIRE(run({"gen", "--out-dir", dir.path.string(), "--num-queries", "6", "--config",
               (kGolden / "small_synth.cfg").string(), "--seed", "2"})
              .code == 0);
  const std::string graph = dir / "graph.jsonl";
  const std::string queries = dir / "queries.jsonl";
  REQUIRE(run({"train", "--graph", graph, "--queries", queries, "--max-steps", "10", "--out",
               dir / "ck.json", "--config", (kGolden / "small_model.cfg").string()})
              .code == 0);
  for (const char* jobs : {"1", "4"}) {
    REQUIRE(run({"retrieve", "--checkpoint", dir / "ck.json", "--graph", graph, "--queries",
                 queries, "--out", dir / (std::string("r") + jobs + ".jsonl"), "--jobs", jobs,
                 "--seed", "5"})
                .code == 0);
  }
  CHECK(read_file(dir / "r1.jsonl") == read_file(dir / "r4.jsonl"));

  REQUIRE(run({"baseline-dense", "--graph", graph, "--queries", queries, "--out",
               dir / "dense.jsonl", "--k", "5"})
              .code == 0);
  const auto first = nlohmann::json::parse(read_file(dir / "dense.jsonl").substr(0, read_file(dir / "dense.jsonl").find('\n')));
  CHECK(first["ranked"].size() == 5);
}

TEST_CASE("oracle command") {
  const TempDir dir;
  const Run r = run({"oracle", "--fixture", "star-3-graded-rewards", "--out", dir / "o.json"});
  REQUIRE(r.code == 0);
  CHECK(read_file(dir / "o.json") ==
        read_file(kGolden / "fixtures" / "star-3-graded-rewards" / "oracle.json"));

  const Run over = run({"oracle", "--fixture", "binary-tree-depth-2", "--budget", "3", "--out",
                        dir / "o2.json"});
  CHECK(over.code == 1);
  CHECK(over.error()["error"]["kind"] == "budget_exceeded");
}

TEST_CASE("errors are machine readable") {
  const Run unknown = run({"train", "--bogus"});
  CHECK(unknown.code == 2);
  CHECK(unknown.error()["error"]["kind"] == "usage");

  const Run none = run({});
  CHECK(none.code == 2);

  const Run missing = run({"eval", "--results", "/nonexistent/r.jsonl", "--fixture", "chain-3",
                           "--out", "/tmp/x.csv"});
  CHECK(missing.code == 2);
  CHECK(missing.error()["error"].contains("message"));

  const TempDir dir;
  write_file(dir / "bad.jsonl", "{\"kind\":\"node\"}\n");
  const Run bad = run({"eval", "--results", dir / "bad.jsonl", "--graph", dir / "bad.jsonl",
                       "--queries", dir / "bad.jsonl", "--out", dir / "r.csv"});
  CHECK(bad.code == 1);
  CHECK(bad.error()["error"]["kind"] == "parse");
}

TEST_CASE("seed falls back to FLOWGRAPH_SEED") {
  const TempDir dir;
  ::setenv("FLOWGRAPH_SEED", "41", 1);
  const Run r = run({"gen", "--fixture", "chain-3", "--out-dir", dir.path.string()});
  ::unsetenv("FLOWGRAPH_SEED");
  REQUIRE(r.code == 0);
  CHECK(r.manifest()["seed"] == 41);

  const Run to_file = run({"gen", "--fixture", "chain-3", "--out-dir", dir.path.string(),
                           "--manifest", dir / "m.json"});
  REQUIRE(to_file.code == 0);
  CHECK(to_file.out.empty());
  CHECK(nlohmann::json::parse(read_file(dir / "m.json"))["command"] == "gen");
}
