#pragma once

#include <map>
#include <string>
#include <vector>

#include "graphflow/kg_store.hpp"
#include "graphflow/mdp.hpp"
#include "graphflow/metrics.hpp"
#include "graphflow/text_encoder.hpp"

namespace graphflow {

// Synthetic scholarly-style graph: papers written by authors and published
// in venues, plus one planted retrieval task per query.
//
// Each query names a unique anchor paper (its seed) and two topic words.
// Targets are papers carrying both topic words, reached from the anchor
// through planted authors (2 hops) or through an intermediate citing paper
// (3 hops). Planted authors also wrote distractor papers that carry only one
// of the topic words.
struct SynthConfig {
  std::size_t num_papers = 300;
  std::size_t num_authors = 80;
  std::size_t num_venues = 8;
  std::size_t vocab_size = 2000;
  std::size_t topic_vocab = 24;
  std::size_t tokens_per_doc = 24;
  std::size_t num_queries = 60;
  std::size_t num_test_queries = 0;
  std::vector<double> bin_weights = {0.25, 0.25, 0.25, 0.25};
  BinEdges bins;
  std::size_t max_targets = 20;  // upper edge of the open last bin
  double deep_target_rate = 0.25;
  int depth_cutoff = 6;
  std::uint64_t seed = 0;
  EncoderConfig encoder;  // used to confirm each query's seed node

  void validate() const;
};

struct PlantedQuery {
  std::string qid;
  std::string split;  // "train" or "test"
  std::string seed_node;
  int bin = 1;
  std::vector<std::string> targets;
  std::vector<int> distances;  // seed -> each target, hops
};

struct SynthOutput {
  Graph graph;
  QuerySet queries;       // train split
  QuerySet test_queries;  // possibly empty
  std::vector<PlantedQuery> planted;

  std::string graph_jsonl() const;
  std::string queries_jsonl() const;
  std::string test_queries_jsonl() const;
  std::string manifest_json() const;
};

// Throws kInvalidArgument naming the query index when a planted target ends
// up out of reach or the seed lookup misses the anchor.
SynthOutput generate(const SynthConfig& cfg);

// Hand-built micro-graphs with their query and reward setup.
struct Fixture {
  std::string name;
  Graph graph;
  QuerySet queries;
  RewardSpec reward;
  MdpConfig mdp;
  NodeIndex seed = 0;  // expected top-1 seed node of the first query
};

// isolated-node, chain-3, diamond, star-2-targets, star-3-graded-rewards,
// binary-tree-depth-2.
std::vector<std::string> fixture_names();
Fixture make_fixture(std::string_view name);

// Hop distance from `from` to `to`, or -1 when unreachable.
int hop_distance(const Graph& graph, NodeIndex from, NodeIndex to);

}  // namespace graphflow
