#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "graphflow/featurize.hpp"
#include "graphflow/flow_model.hpp"

namespace graphflow {

struct SamplerConfig {
  std::size_t n = 20;
  double temperature = 1.0;  // scores are divided by this before softmax
  std::uint64_t global_seed = 0;
};

struct RankedEntry {
  NodeIndex node = 0;
  double score = 0.0;
  std::size_t count = 0;
};

struct SampledPath {
  std::vector<NodeIndex> path;  // visited nodes; the last one was retrieved
  NodeIndex terminal() const { return path.back(); }
};

struct RetrievalResult {
  std::string qid;
  std::vector<RankedEntry> ranked;  // deduplicated
  std::vector<SampledPath> samples;
  bool rerank_applied = false;

  std::vector<NodeIndex> ranked_nodes() const;
  std::vector<NodeIndex> sample_terminals() const;
};

// A trained model bound to a graph, with the featurization the model was
// trained with.
class Agent {
 public:
  Agent(const Model& model, const Graph& graph);

  const Model& model() const { return *model_; }
  const Featurizer& featurizer() const { return featurizer_; }

  NodeIndex seed_node(const Query& query) const;

  // Action distribution at a non-stopped state, aligned with
  // candidate_actions().
  std::vector<double> action_probs(const State& state,
                                   double temperature = 1.0) const;

  Trajectory sample_trajectory(const Query& query, std::uint64_t rng_seed,
                               double temperature = 1.0) const;

  RetrievalResult retrieve(const Query& query, const SamplerConfig& cfg) const;

  // Reorders the distinct terminals by the Stop score at the state where
  // each was first retrieved.
  RetrievalResult rerank(const Query& query,
                         const RetrievalResult& result) const;

 private:
  const Model* model_;
  HashingEncoder encoder_;
  Featurizer featurizer_;
};

// Per-sample seed for sample `index` of query `qid`.
std::uint64_t sample_seed(std::uint64_t global_seed, std::string_view qid,
                          std::size_t index);

std::string result_to_json_line(const RetrievalResult& result,
                                const Graph& graph);
std::string results_to_jsonl(const std::vector<RetrievalResult>& results,
                             const Graph& graph);
std::vector<RetrievalResult> parse_results_jsonl(std::string_view content,
                                                 const Graph& graph);

}  // namespace graphflow
