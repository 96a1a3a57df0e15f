#include <doctest.h>

#include <filesystem>

#include "graphflow/error.hpp"
#include "graphflow/kg_store.hpp"

using namespace graphflow;

namespace {

const char* kTwoNodes =
    R"({"kind":"node","id":"a","text":"alpha doc","type":"paper"}
{"kind":"node","id":"b","text":"beta doc","type":"paper"}
{"kind":"edge","src":"a","dst":"b","rel":"cites"}
)";

template <typename Fn>
std::string error_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("empty file gives an empty graph") {
  const Graph g = parse_graph_jsonl("");
  CHECK(g.node_count() == 0);
  CHECK(g.edge_count() == 0);
}

TEST_CASE("two-node fixture is traversable both ways") {
  const Graph g = parse_graph_jsonl(kTwoNodes);
  CHECK(g.node_count() == 2);
  using Pair = std::pair<std::string, std::string>;
  CHECK(g.neighbors("a") == std::vector<Pair>{{"cites", "b"}});
  CHECK(g.neighbors("b") == std::vector<Pair>{{"cites^-1", "a"}});
}

TEST_CASE("undeclared edge endpoint is rejected by name") {
  const std::string msg = error_of([] {
    parse_graph_jsonl(
        R"({"kind":"node","id":"a","text":"","type":"t"}
{"kind":"edge","src":"c","dst":"a","rel":"r"}
)");
  });
  CHECK(contains(msg, "unknown node c"));
}

TEST_CASE("malformed and duplicate lines report the line number") {
  CHECK(contains(error_of([] {
                   parse_graph_jsonl(
                       "{\"kind\":\"node\",\"id\":\"a\",\"text\":\"\",\"type\":\"t\"}\n{oops\n");
                 }),
                 "line 2"));
  CHECK(contains(error_of([] {
                   parse_graph_jsonl(
                       "{\"kind\":\"node\",\"id\":\"a\",\"text\":\"\",\"type\":\"t\"}\n"
                       "{\"kind\":\"node\",\"id\":\"a\",\"text\":\"\",\"type\":\"t\"}\n");
                 }),
                 "duplicate node id a"));
}

TEST_CASE("neighbors: isolated, single and star") {
  const Graph iso = parse_graph_jsonl(
      R"({"kind":"node","id":"x","text":"x","type":"t"})");
  CHECK(iso.neighbors("x").empty());

  const Graph star = parse_graph_jsonl(
      R"({"kind":"node","id":"c","text":"","type":"t"}
{"kind":"edge","src":"c","dst":"l3","rel":"link"}
{"kind":"edge","src":"c","dst":"l1","rel":"link"}
{"kind":"node","id":"l1","text":"","type":"t"}
{"kind":"node","id":"l2","text":"","type":"t"}
{"kind":"node","id":"l3","text":"","type":"t"}
{"kind":"edge","src":"c","dst":"l2","rel":"another"}
)");
  using Pair = std::pair<std::string, std::string>;
  CHECK(star.neighbors("c") ==
        std::vector<Pair>{{"another", "l2"}, {"link", "l1"}, {"link", "l3"}});
  CHECK_THROWS_AS(star.neighbors("nope"), Error);
}

TEST_CASE("round trip keeps the adjacency") {
  const Graph g = parse_graph_jsonl(kTwoNodes);
  const Graph again = parse_graph_jsonl(graph_to_jsonl(g));
  REQUIRE(again.node_count() == g.node_count());
  for (NodeIndex i = 0; i < g.node_count(); ++i) {
    CHECK(again.neighbors(g.node(i).id) == g.neighbors(g.node(i).id));
    CHECK(again.node(i).text == g.node(i).text);
  }
  const auto dir = std::filesystem::temp_directory_path() / "graphflow_kg_test";
  std::filesystem::create_directories(dir);
  save_graph(g, dir / "g.jsonl");
  CHECK(graph_to_jsonl(load_graph(dir / "g.jsonl")) == graph_to_jsonl(g));
}

TEST_CASE("validate_graph") {
  const Graph g = parse_graph_jsonl(kTwoNodes);
  ValidationReport ok = validate_graph(g);
  CHECK(ok.valid);
  CHECK(ok.issues.empty());
  CHECK(ok.degree.min == 1);
  CHECK(ok.degree.max == 1);

  const Graph empty_doc = parse_graph_jsonl(
      R"({"kind":"node","id":"a","text":"","type":"t"})");
  ValidationReport warn = validate_graph(empty_doc);
  CHECK(warn.valid);
  CHECK(warn.warnings.size() == 1);
  CHECK(warn.empty_documents == 1);

  Graph broken = parse_graph_jsonl(kTwoNodes);
  broken.mutable_adjacency_for_testing()[0].push_back({"cites", 7});
  CHECK_FALSE(validate_graph(broken).valid);
}

TEST_CASE("query loading") {
  const Graph g = parse_graph_jsonl(kTwoNodes);
  const QuerySet qs =
      parse_queries_jsonl(R"({"qid":"q1","text":"find b","targets":["b"]})", g);
  CHECK(qs.queries.size() == 1);
  CHECK(qs.queries[0].targets == std::vector<NodeIndex>{1});
  CHECK(qs.by_qid("q1").text == "find b");

  CHECK(contains(error_of([&] {
                   parse_queries_jsonl(
                       R"({"qid":"q1","text":"x","targets":[]})", g);
                 }),
                 "empty target list"));
  CHECK(contains(error_of([&] {
                   parse_queries_jsonl(
                       R"({"qid":"q1","text":"x","targets":["zzz"]})", g);
                 }),
                 "unknown target"));
  CHECK(contains(error_of([&] {
                   parse_queries_jsonl(
                       R"({"qid":"q1","text":"x","targets":["a"]}
{"qid":"q1","text":"y","targets":["b"]})",
                       g);
                 }),
                 "duplicate qid"));
  CHECK(parse_queries_jsonl(queries_to_jsonl(qs, g), g).queries[0].qid == "q1");
}

TEST_CASE("missing file is an io error") {
  try {
    load_graph("/nonexistent/graph.jsonl");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kIo);
  }
}
