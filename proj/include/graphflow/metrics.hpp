#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "graphflow/kg_store.hpp"
#include "graphflow/sampler.hpp"

namespace graphflow {

// 1 iff one of the first min(k, |ranked|) entries is a target.
int hit_at_k(std::span<const NodeIndex> ranked,
             std::span<const NodeIndex> targets, std::size_t k);

// Reciprocal rank of the first target, 0 if none.
double mrr(std::span<const NodeIndex> ranked,
           std::span<const NodeIndex> targets);

// Correct entries among the first k (duplicates count) over
// min(k, |targets|), capped at 1.
double recall_at_k(std::span<const NodeIndex> retrieved,
                   std::span<const NodeIndex> targets, std::size_t k);

// Distinct targets among the first k over min(k, |targets|).
double dedup_recall_at_k(std::span<const NodeIndex> retrieved,
                         std::span<const NodeIndex> targets, std::size_t k);

// Inclusive lower edges of the difficulty bins by |targets|; bin i covers
// [edges[i], edges[i+1]-1] and the last one is open-ended.
struct BinEdges {
  std::vector<std::size_t> lower = {1, 6, 11, 16};

  int bin_of(std::size_t num_targets) const;  // 1-based
};

struct MetricsRow {
  std::string qid;
  std::size_t num_targets = 0;
  int bin = 1;
  double hit1 = 0.0;
  double hit5 = 0.0;
  double mrr = 0.0;
  double r20 = 0.0;
  double dr20 = 0.0;
  std::optional<double> hook_score;
};

struct MetricsAggregate {
  std::size_t count = 0;
  double hit1 = 0.0;
  double hit5 = 0.0;
  double mrr = 0.0;
  double r20 = 0.0;
  double dr20 = 0.0;
};

// Reserved extension point for answer-quality scores computed by an
// external model from the query and the retrieved documents.
using AnswerScoreHook = std::function<double(
    const Query& query, const std::vector<std::string>& documents)>;

struct EvalOptions {
  BinEdges bins;
  std::size_t recall_k = 20;
  AnswerScoreHook answer_hook;  // must be safe to call concurrently if jobs > 1
  std::size_t jobs = 1;
};

struct MetricsReport {
  std::vector<MetricsRow> rows;
  MetricsAggregate overall;
  std::vector<MetricsAggregate> per_bin;  // index bin-1
  EvalOptions options;

  std::string to_csv() const;
  std::string to_json() const;
};

// Hit/MRR read the ranked list; R@k/D-R@k read the raw sample terminals in
// sampling order.
MetricsReport evaluate(const std::vector<RetrievalResult>& results,
                       const QuerySet& queries, const Graph& graph,
                       const EvalOptions& options = {});

}  // namespace graphflow
