#include <doctest.h>

#include <cmath>
#include <random>

#include <json.hpp>

#include "graphflow/error.hpp"
#include "graphflow/oracle.hpp"
#include "graphflow/synth.hpp"

using namespace graphflow;

namespace {

Enumeration enumerate_fixture(const Fixture& f, std::size_t budget = kDefaultOracleBudget) {
  const Query& q = f.queries.queries[0];
  return enumerate_trajectories(f.graph, {q.qid, q.text}, f.seed, f.mdp, f.reward, q.targets,
                                budget);
}

std::vector<std::string> ids(const Graph& g, const std::vector<NodeIndex>& path) {
  std::vector<std::string> out;
  for (NodeIndex n : path) out.push_back(g.node(n).id);
  return out;
}

}  // namespace

TEST_CASE("enumeration sizes") {
  const Fixture iso = make_fixture("isolated-node");
  CHECK(enumerate_fixture(iso).trajectory_count() == 1);

  // chain a-b with cutoff 1: stop at a, or a->b then stop.
  Fixture chain = make_fixture("chain-3");
  chain.mdp.depth_cutoff = 1;
  const Enumeration e1 = enumerate_fixture(chain);
  REQUIRE(e1.trajectory_count() == 2);
  CHECK(ids(chain.graph, e1.states[0].path) == std::vector<std::string>{"a"});
  CHECK(ids(chain.graph, e1.states[1].path) == std::vector<std::string>{"a", "b"});

  // Root, 2 children, 4 grandchildren.
  const Fixture tree = make_fixture("binary-tree-depth-2");
  const Enumeration et = enumerate_fixture(tree);
  CHECK(et.trajectory_count() == 7);
  int leaves = 0;
  for (const TreeState& s : et.states) leaves += s.path.size() == 3;
  CHECK(leaves == 4);

  // Each state's children are exactly its move candidates.
  for (std::size_t i = 0; i < et.states.size(); ++i) {
    const TreeState& s = et.states[i];
    for (int c : s.children) {
      CHECK(et.states[c].parent == static_cast<int>(i));
      CHECK(et.states[c].path.size() == s.path.size() + 1);
    }
  }
}

TEST_CASE("the node budget is a hard error") {
  const Fixture tree = make_fixture("binary-tree-depth-2");
  CHECK_THROWS_AS(enumerate_fixture(tree, 6), Error);
  CHECK(enumerate_fixture(tree, 7).trajectory_count() == 7);
}

TEST_CASE("exact flows on the chain") {
  Fixture chain = make_fixture("chain-3");
  chain.mdp.depth_cutoff = 1;
  // Only a and b: make b the target.
  const Query q{"q", chain.queries.queries[0].text, {chain.graph.index_of("b")}};
  const Enumeration e = enumerate_trajectories(chain.graph, {q.qid, q.text}, chain.seed,
                                               chain.mdp, chain.reward, q.targets);
  const FlowTable t = exact_flows(e);
  CHECK(t.partition() == 1.0);
  const auto p = exact_policy(t, 0);
  REQUIRE(p.size() == 2);
  CHECK(p[0] == 0.0);  // Stop
  CHECK(p[1] == 1.0);  // move to b
  CHECK(exact_policy(t, 1) == std::vector<double>{1.0});
}

TEST_CASE("graded rewards give P* = i/6") {
  const Fixture f = make_fixture("star-3-graded-rewards");
  const Enumeration e = enumerate_fixture(f);
  const FlowTable t = exact_flows(e);
  CHECK(t.partition() == doctest::Approx(6.0).epsilon(1e-15));
  const auto dist = terminal_distribution(t);
  CHECK(dist.at(f.graph.index_of("x")) == doctest::Approx(1.0 / 6).epsilon(1e-14));
  CHECK(dist.at(f.graph.index_of("y")) == doctest::Approx(2.0 / 6).epsilon(1e-14));
  CHECK(dist.at(f.graph.index_of("z")) == doctest::Approx(3.0 / 6).epsilon(1e-14));
  const auto probs = trajectory_probabilities(t);
  double sum = 0.0;
  for (double p : probs) sum += p;
  CHECK(std::abs(sum - 1.0) <= 1e-12);
}

TEST_CASE("equal rewards give a uniform P*") {
  const Fixture f = make_fixture("binary-tree-depth-2");
  const Enumeration e = enumerate_fixture(f);
  const FlowTable t = exact_flows(e);
  CHECK(t.partition() == 4.0);
  for (const auto& [node, p] : terminal_distribution(t)) {
    if (p > 0) CHECK(p == doctest::Approx(0.25).epsilon(1e-15));
  }
}

TEST_CASE("symmetric two-target star policy") {
  const Fixture f = make_fixture("star-2-targets");
  const Enumeration e = enumerate_fixture(f);
  const FlowTable t = exact_flows(e);
  const auto p = exact_policy(t, 0);
  REQUIRE(p.size() == 3);
  CHECK(p[0] == 0.0);
  CHECK(p[1] == 0.5);
  CHECK(p[2] == 0.5);
  // Leaves can only stop.
  for (std::size_t i = 1; i < t.enumeration().states.size(); ++i) {
    CHECK(exact_policy(t, i) == std::vector<double>{1.0});
  }
}

TEST_CASE("conservation and simplex on every fixture") {
  for (const std::string& name : fixture_names()) {
    CAPTURE(name);
    const Fixture f = make_fixture(name);
    const Enumeration e = enumerate_fixture(f);
    const FlowTable t = exact_flows(e);
    CHECK(t.conservation_error() <= 1e-12);
    CHECK(t.crosscheck_error() <= 1e-12);
    // Recompute conservation independently of the table's own check.
    for (std::size_t i = 0; i < e.states.size(); ++i) {
      double rhs = e.states[i].stop_reward;
      for (int c : e.states[i].children) rhs += t.flow(c);
      CHECK(std::abs(t.flow(i) - rhs) <= 1e-12);
      if (t.flow(i) > 0) {
        const auto p = exact_policy(t, i);
        double sum = 0.0;
        for (double v : p) {
          CHECK(v >= 0.0);
          sum += v;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
      } else {
        CHECK_THROWS_AS(exact_policy(t, i), Error);
      }
    }
    CHECK(t.index_of(e.states.back().path) == e.states.size() - 1);
  }
}

TEST_CASE("zero total reward is rejected") {
  const Fixture f = make_fixture("chain-3");
  const Query& q = f.queries.queries[0];
  MdpConfig short_mdp = f.mdp;
  short_mdp.depth_cutoff = 1;
  const Enumeration e = enumerate_trajectories(f.graph, {q.qid, q.text}, f.seed, short_mdp,
                                               f.reward, q.targets);
  CHECK_THROWS_AS(exact_flows(e), Error);
}

TEST_CASE("distribution_distance") {
  const std::map<NodeIndex, double> p = {{1, 0.5}, {2, 0.5}};
  CHECK(distribution_distance(p, p).total_variation == 0.0);
  const std::map<NodeIndex, double> disjoint = {{3, 1.0}};
  CHECK(distribution_distance(p, disjoint).total_variation == doctest::Approx(1.0));
  CHECK(distribution_distance(p, disjoint).l1 == doctest::Approx(2.0));
  const std::map<NodeIndex, double> exact = {{1, 1.0 / 3}, {2, 2.0 / 3}};
  CHECK(distribution_distance(p, exact).total_variation == doctest::Approx(1.0 / 6).epsilon(1e-14));
  CHECK_THROWS_AS(distribution_distance({{1, 0.7}}, exact), Error);
}

TEST_CASE("sampling the exact policy reproduces P*") {
  const Fixture f = make_fixture("binary-tree-depth-2");
  // Graded rewards so P* is not uniform.
  std::map<NodeIndex, double> table;
  double r = 1.0;
  for (const char* id : {"c1", "g1", "g2", "g3", "g4", "r"}) table[f.graph.index_of(id)] = r++;
  const RewardSpec reward = RewardSpec::from_table(table);
  const Query& q = f.queries.queries[0];
  const Enumeration e =
      enumerate_trajectories(f.graph, {q.qid, q.text}, f.seed, f.mdp, reward, q.targets);
  const FlowTable t = exact_flows(e);
  const auto pstar = trajectory_probabilities(t);

  std::mt19937_64 rng(77);
  const int n = 100000;
  std::vector<double> freq(e.states.size(), 0.0);
  for (int s = 0; s < n; ++s) {
    std::size_t at = 0;
    for (;;) {
      const auto pol = exact_policy(t, at);
      std::discrete_distribution<std::size_t> pick(pol.begin(), pol.end());
      const std::size_t a = pick(rng);
      if (a == 0) break;
      at = static_cast<std::size_t>(e.states[at].children[a - 1]);
    }
    freq[at] += 1.0 / n;
  }
  std::size_t within = 0;
  for (std::size_t i = 0; i < pstar.size(); ++i) {
    const double p = pstar[i];
    within += std::abs(freq[i] - p) <= 4.0 * std::sqrt(p * (1 - p) / n) + 1e-12;
  }
  CHECK(within >= static_cast<std::size_t>(std::ceil(0.99 * pstar.size())));
}

TEST_CASE("oracle JSON dump") {
  const Fixture f = make_fixture("star-3-graded-rewards");
  const Enumeration e = enumerate_fixture(f);
  const FlowTable t = exact_flows(e);
  const auto js = nlohmann::json::parse(oracle_to_json(t, f.graph));
  CHECK(js.dump() == nlohmann::json::parse(oracle_to_json(t, f.graph)).dump());
  CHECK(js.contains("trajectories"));
  CHECK(js["trajectories"].size() == e.trajectory_count());
  CHECK(js["partition"].get<double>() == doctest::Approx(6.0));
}
