#include "graphflow/synth.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include <json.hpp>

#include "graphflow/error.hpp"
#include "graphflow/rng.hpp"

namespace graphflow {

void SynthConfig::validate() const {
  if (num_papers == 0 || num_authors == 0 || num_venues == 0 ||
      vocab_size == 0 || tokens_per_doc == 0 || num_queries == 0) {
    throw Error(ErrorKind::kInvalidArgument, "synth counts must be positive");
  }
  if (topic_vocab < 2) {
    throw Error(ErrorKind::kInvalidArgument, "topic_vocab must be >= 2");
  }
  if (bin_weights.size() != bins.lower.size()) {
    throw Error(ErrorKind::kInvalidArgument,
                "bin_weights and bin edges differ in length");
  }
  double total = 0.0;
  for (double w : bin_weights) {
    if (w < 0.0) throw Error(ErrorKind::kInvalidArgument, "negative bin weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(ErrorKind::kInvalidArgument, "bin weights must sum to 1");
  }
  if (max_targets < bins.lower.back()) {
    throw Error(ErrorKind::kInvalidArgument,
                "max_targets below the last bin edge");
  }
  encoder.validate();
}

int hop_distance(const Graph& graph, NodeIndex from, NodeIndex to) {
  std::vector<int> dist(graph.node_count(), -1);
  std::deque<NodeIndex> frontier{from};
  dist[from] = 0;
  while (!frontier.empty()) {
    const NodeIndex u = frontier.front();
    frontier.pop_front();
    if (u == to) return dist[u];
    for (const Neighbor& n : graph.neighbors(u)) {
      if (dist[n.node] < 0) {
        dist[n.node] = dist[u] + 1;
        frontier.push_back(n.node);
      }
    }
  }
  return -1;
}

namespace {

// Largest-remainder apportionment of `total` items to the weights.
std::vector<std::size_t> apportion(const std::vector<double>& weights,
                                   std::size_t total) {
  std::vector<std::size_t> counts(weights.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = weights[i] * static_cast<double>(total);
    counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    assigned += counts[i];
    remainders.push_back({exact - static_cast<double>(counts[i]), i});
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) {
    ++counts[remainders[i % remainders.size()].second];
  }
  return counts;
}

class Builder {
 public:
  Builder(const SynthConfig& cfg, Rng& rng) : cfg_(cfg), rng_(rng) {}

  NodeIndex add_node(std::string id, std::string text, std::string type) {
    nodes_.push_back({std::move(id), std::move(text), std::move(type)});
    return static_cast<NodeIndex>(nodes_.size() - 1);
  }
  void add_edge(NodeIndex src, NodeIndex dst, std::string rel) {
    edges_.push_back({src, dst, std::move(rel)});
  }

  std::string filler(std::size_t count) {
    std::string out;
    for (std::size_t i = 0; i < count; ++i) {
      if (i) out += ' ';
      out += "w" + std::to_string(uniform_index(rng_, cfg_.vocab_size));
    }
    return out;
  }

  // Filler with `words` inserted at random positions.
  std::string doc_with(const std::vector<std::string>& words) {
    std::vector<std::string> tokens;
    const std::size_t n =
        cfg_.tokens_per_doc > words.size() ? cfg_.tokens_per_doc - words.size()
                                           : 0;
    for (std::size_t i = 0; i < n; ++i) {
      tokens.push_back("w" + std::to_string(uniform_index(rng_, cfg_.vocab_size)));
    }
    for (const std::string& w : words) {
      const auto pos = uniform_index(rng_, tokens.size() + 1);
      tokens.insert(tokens.begin() + static_cast<long>(pos), w);
    }
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i) out += ' ';
      out += tokens[i];
    }
    return out;
  }

  std::vector<NodeRecord>& nodes() { return nodes_; }
  std::vector<EdgeRecord>& edges() { return edges_; }

 private:
  const SynthConfig& cfg_;
  Rng& rng_;
  std::vector<NodeRecord> nodes_;
  std::vector<EdgeRecord> edges_;
};

std::string pad(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%03zu", i);
  return buf;
}

struct QueryPlan {
  std::string qid;
  std::string split;
  std::string text;
  int bin = 1;
  NodeIndex hub = 0;
  std::vector<NodeIndex> targets;
};

}  // namespace

SynthOutput generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  Builder b(cfg, rng);

  std::vector<NodeIndex> papers, authors, venues;
  for (std::size_t i = 0; i < cfg.num_venues; ++i) {
    venues.push_back(b.add_node("v" + pad(i),
                                "venue proceedings " + b.filler(cfg.tokens_per_doc / 3),
                                "venue"));
  }
  for (std::size_t i = 0; i < cfg.num_authors; ++i) {
    authors.push_back(b.add_node("a" + pad(i),
                                 "researcher " + b.filler(cfg.tokens_per_doc / 3),
                                 "author"));
  }
  for (std::size_t i = 0; i < cfg.num_papers; ++i) {
    papers.push_back(
        b.add_node("p" + pad(i), b.filler(cfg.tokens_per_doc), "paper"));
  }
  auto pick = [&](const std::vector<NodeIndex>& pool) {
    return pool[uniform_index(rng, pool.size())];
  };
  for (NodeIndex p : papers) {
    const std::size_t n_auth = 1 + uniform_index(rng, 2);
    for (std::size_t k = 0; k < n_auth; ++k) b.add_edge(p, pick(authors), "written_by");
    b.add_edge(p, pick(venues), "published_in");
    const std::size_t n_cite = uniform_index(rng, 3);
    for (std::size_t k = 0; k < n_cite; ++k) {
      const NodeIndex q = pick(papers);
      if (q != p) b.add_edge(p, q, "cites");
    }
  }

  // Difficulty bins: exact apportionment per split, then shuffled.
  auto bin_sequence = [&](std::size_t n) {
    std::vector<int> seq;
    const auto counts = apportion(cfg.bin_weights, n);
    for (std::size_t bi = 0; bi < counts.size(); ++bi) {
      seq.insert(seq.end(), counts[bi], static_cast<int>(bi) + 1);
    }
    shuffle(seq, rng);
    return seq;
  };

  std::vector<QueryPlan> plans;
  auto plant = [&](const std::string& qid, const std::string& split, int bin) {
    QueryPlan plan;
    plan.qid = qid;
    plan.split = split;
    plan.bin = bin;
    const std::size_t bi = static_cast<std::size_t>(bin - 1);
    const std::size_t lo = cfg.bins.lower[bi];
    const std::size_t hi = bi + 1 < cfg.bins.lower.size()
                               ? cfg.bins.lower[bi + 1] - 1
                               : cfg.max_targets;
    const std::size_t m = lo + uniform_index(rng, hi - lo + 1);

    const std::size_t ta = uniform_index(rng, cfg.topic_vocab);
    std::size_t tb = uniform_index(rng, cfg.topic_vocab - 1);
    if (tb >= ta) ++tb;
    const std::string topic_a = "topic" + std::to_string(ta);
    const std::string topic_b = "topic" + std::to_string(tb);
    plan.text = "anchor" + qid + " " + topic_a + " " + topic_b;

    const std::string prefix = qid + "_";
    plan.hub = b.add_node(prefix + "hub", plan.text, "paper");
    b.add_edge(plan.hub, pick(venues), "published_in");
    b.add_edge(plan.hub, pick(authors), "written_by");
    const std::size_t n_cite = 1 + uniform_index(rng, 2);
    for (std::size_t k = 0; k < n_cite; ++k) b.add_edge(plan.hub, pick(papers), "cites");

    // About four targets per planted author.
    const std::size_t groups = (m + 3) / 4;
    std::vector<NodeIndex> planted_authors;
    for (std::size_t g = 0; g < groups; ++g) {
      const NodeIndex a = b.add_node(prefix + "au" + std::to_string(g),
                                     "researcher " + b.filler(cfg.tokens_per_doc / 3),
                                     "author");
      planted_authors.push_back(a);
      b.add_edge(plan.hub, a, "written_by");
      // Distractors carry one topic word only.
      const std::size_t n_distract = 1 + uniform_index(rng, 2);
      for (std::size_t d = 0; d < n_distract; ++d) {
        const std::string& word = uniform_index(rng, 2) ? topic_a : topic_b;
        const NodeIndex p =
            b.add_node(prefix + "d" + std::to_string(g) + "_" + std::to_string(d),
                       b.doc_with({word}), "paper");
        b.add_edge(p, a, "written_by");
        b.add_edge(p, pick(venues), "published_in");
      }
    }
    for (std::size_t t = 0; t < m; ++t) {
      const NodeIndex a = planted_authors[t % groups];
      const NodeIndex target = b.add_node(prefix + "t" + std::to_string(t),
                                          b.doc_with({topic_a, topic_b}), "paper");
      b.add_edge(target, pick(venues), "published_in");
      if (uniform01(rng) < cfg.deep_target_rate) {
        const NodeIndex mid = b.add_node(prefix + "m" + std::to_string(t),
                                         b.filler(cfg.tokens_per_doc), "paper");
        b.add_edge(mid, a, "written_by");
        b.add_edge(mid, target, "cites");
      } else {
        b.add_edge(target, a, "written_by");
      }
      plan.targets.push_back(target);
    }
    plans.push_back(std::move(plan));
  };

  const auto train_bins = bin_sequence(cfg.num_queries);
  for (std::size_t i = 0; i < cfg.num_queries; ++i) {
    plant("q" + pad(i), "train", train_bins[i]);
  }
  const auto test_bins = bin_sequence(cfg.num_test_queries);
  for (std::size_t i = 0; i < cfg.num_test_queries; ++i) {
    plant("t" + pad(i), "test", test_bins[i]);
  }

  SynthOutput out;
  out.graph = Graph::build("synth-" + std::to_string(cfg.seed),
                           std::move(b.nodes()), std::move(b.edges()));
  const HashingEncoder encoder(cfg.encoder);
  const DocumentIndex index(out.graph, encoder);
  for (std::size_t qi = 0; qi < plans.size(); ++qi) {
    const QueryPlan& plan = plans[qi];
    const NodeIndex seed = index.rank(plan.text, 1)[0].node;
    if (seed != plan.hub) {
      throw Error(ErrorKind::kInvalidArgument,
                  "query " + std::to_string(qi) +
                      ": seed lookup does not return the anchor node");
    }
    PlantedQuery pq;
    pq.qid = plan.qid;
    pq.split = plan.split;
    pq.seed_node = out.graph.node(seed).id;
    pq.bin = plan.bin;
    Query q{plan.qid, plan.text, plan.targets};
    std::sort(q.targets.begin(), q.targets.end());
    for (NodeIndex t : q.targets) {
      const int d = hop_distance(out.graph, seed, t);
      if (d < 0 || d > cfg.depth_cutoff) {
        throw Error(ErrorKind::kInvalidArgument,
                    "query " + std::to_string(qi) +
                        ": target out of reach within depth_cutoff");
      }
      pq.targets.push_back(out.graph.node(t).id);
      pq.distances.push_back(d);
    }
    out.planted.push_back(std::move(pq));
    (plan.split == "train" ? out.queries : out.test_queries)
        .queries.push_back(std::move(q));
  }
  return out;
}

std::string SynthOutput::graph_jsonl() const { return graph_to_jsonl(graph); }

std::string SynthOutput::queries_jsonl() const {
  return queries_to_jsonl(queries, graph);
}

std::string SynthOutput::test_queries_jsonl() const {
  return queries_to_jsonl(test_queries, graph);
}

std::string SynthOutput::manifest_json() const {
  using nlohmann::ordered_json;
  ordered_json qs = ordered_json::array();
  for (const PlantedQuery& p : planted) {
    qs.push_back({{"qid", p.qid},
                  {"split", p.split},
                  {"seed_node", p.seed_node},
                  {"bin", p.bin},
                  {"targets", p.targets},
                  {"distances", p.distances}});
  }
  ordered_json doc = {{"graph", graph.name()},
                      {"nodes", graph.node_count()},
                      {"edges", graph.edge_count()},
                      {"queries", qs}};
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Fixtures

std::vector<std::string> fixture_names() {
  return {"isolated-node", "chain-3",
          "diamond",       "star-2-targets",
          "star-3-graded-rewards", "binary-tree-depth-2"};
}

namespace {

struct FixtureSpec {
  std::vector<NodeRecord> nodes;
  std::vector<std::tuple<std::string, std::string, std::string>> edges;
  std::string query_text;
  std::vector<std::string> targets;
};

Fixture assemble(std::string name, FixtureSpec spec) {
  Fixture f;
  f.name = std::move(name);
  std::vector<EdgeRecord> edges;
  std::map<std::string, NodeIndex> ids;
  for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
    ids[spec.nodes[i].id] = static_cast<NodeIndex>(i);
  }
  for (const auto& [src, dst, rel] : spec.edges) {
    edges.push_back({ids.at(src), ids.at(dst), rel});
  }
  f.graph = Graph::build(f.name, std::move(spec.nodes), std::move(edges));
  Query q{f.name + "-q", spec.query_text, {}};
  for (const std::string& t : spec.targets) q.targets.push_back(ids.at(t));
  std::sort(q.targets.begin(), q.targets.end());
  f.queries.queries.push_back(std::move(q));
  f.seed = 0;  // every fixture's first node is the seed
  return f;
}

}  // namespace

Fixture make_fixture(std::string_view name) {
  if (name == "isolated-node") {
    return assemble(std::string(name),
                    {{{"a", "solitary alpha record", "entity"}}, {},
                     "solitary alpha record", {"a"}});
  }
  if (name == "chain-3") {
    return assemble(std::string(name),
                    {{{"a", "chain start alpha", "entity"},
                      {"b", "chain middle beta", "entity"},
                      {"c", "chain end gamma", "entity"}},
                     {{"a", "b", "next"}, {"b", "c", "next"}},
                     "chain start alpha",
                     {"c"}});
  }
  if (name == "diamond") {
    return assemble(std::string(name),
                    {{{"a", "diamond top alpha", "entity"},
                      {"b", "diamond left beta", "entity"},
                      {"c", "diamond right gamma", "entity"},
                      {"d", "diamond bottom delta", "entity"}},
                     {{"a", "b", "left"},
                      {"a", "c", "right"},
                      {"b", "d", "down"},
                      {"c", "d", "down"}},
                     "diamond top alpha",
                     {"d"}});
  }
  if (name == "star-2-targets") {
    return assemble(std::string(name),
                    {{{"center", "star center hub", "entity"},
                      {"x", "leaf x document", "entity"},
                      {"y", "leaf y document", "entity"}},
                     {{"center", "x", "link"}, {"center", "y", "link"}},
                     "star center hub",
                     {"x", "y"}});
  }
  if (name == "star-3-graded-rewards") {
    Fixture f = assemble(std::string(name),
                         {{{"center", "graded star center", "entity"},
                           {"x", "graded leaf one", "entity"},
                           {"y", "graded leaf two", "entity"},
                           {"z", "graded leaf three", "entity"}},
                          {{"center", "x", "link"},
                           {"center", "y", "link"},
                           {"center", "z", "link"}},
                          "graded star center",
                          {"x", "y", "z"}});
    f.reward = RewardSpec::from_table({{f.graph.index_of("x"), 1.0},
                                       {f.graph.index_of("y"), 2.0},
                                       {f.graph.index_of("z"), 3.0}});
    return f;
  }
  if (name == "binary-tree-depth-2") {
    Fixture f = assemble(
        std::string(name),
        {{{"r", "tree root node", "entity"},
          {"c1", "tree child one", "entity"},
          {"c2", "tree child two", "entity"},
          {"g1", "tree grandchild one", "entity"},
          {"g2", "tree grandchild two", "entity"},
          {"g3", "tree grandchild three", "entity"},
          {"g4", "tree grandchild four", "entity"}},
         {{"r", "c1", "child"},
          {"r", "c2", "child"},
          {"c1", "g1", "child"},
          {"c1", "g2", "child"},
          {"c2", "g3", "child"},
          {"c2", "g4", "child"}},
         "tree root node",
         {"g1", "g2", "g3", "g4"}});
    f.mdp.depth_cutoff = 2;
    return f;
  }
  throw Error(ErrorKind::kNotFound, "unknown fixture " + std::string(name));
}

}  // namespace graphflow
