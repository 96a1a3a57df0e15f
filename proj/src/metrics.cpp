#include "graphflow/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>

#include <json.hpp>

#include "graphflow/error.hpp"
#include "graphflow/parallel.hpp"

namespace graphflow {

namespace {

bool contains(std::span<const NodeIndex> targets, NodeIndex node) {
  return std::find(targets.begin(), targets.end(), node) != targets.end();
}

void require_k(std::size_t k) {
  if (k < 1) throw Error(ErrorKind::kInvalidArgument, "k must be >= 1");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

int hit_at_k(std::span<const NodeIndex> ranked,
             std::span<const NodeIndex> targets, std::size_t k) {
  require_k(k);
  if (targets.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "hit_at_k: empty targets");
  }
  const std::size_t n = std::min(k, ranked.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (contains(targets, ranked[i])) return 1;
  }
  return 0;
}

double mrr(std::span<const NodeIndex> ranked,
           std::span<const NodeIndex> targets) {
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (contains(targets, ranked[i])) return 1.0 / static_cast<double>(i + 1);
  }
  return 0.0;
}

double recall_at_k(std::span<const NodeIndex> retrieved,
                   std::span<const NodeIndex> targets, std::size_t k) {
  require_k(k);
  if (targets.empty()) return 0.0;
  const std::size_t n = std::min(k, retrieved.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (contains(targets, retrieved[i])) ++hits;
  }
  const double denom = static_cast<double>(std::min(k, targets.size()));
  return std::min(1.0, static_cast<double>(hits) / denom);
}

double dedup_recall_at_k(std::span<const NodeIndex> retrieved,
                         std::span<const NodeIndex> targets, std::size_t k) {
  require_k(k);
  if (targets.empty()) return 0.0;
  const std::size_t n = std::min(k, retrieved.size());
  std::set<NodeIndex> found;
  for (std::size_t i = 0; i < n; ++i) {
    if (contains(targets, retrieved[i])) found.insert(retrieved[i]);
  }
  const double denom = static_cast<double>(std::min(k, targets.size()));
  return static_cast<double>(found.size()) / denom;
}

int BinEdges::bin_of(std::size_t num_targets) const {
  int bin = 1;
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (num_targets >= lower[i]) bin = static_cast<int>(i) + 1;
  }
  return bin;
}

MetricsReport evaluate(const std::vector<RetrievalResult>& results,
                       const QuerySet& queries, const Graph& graph,
                       const EvalOptions& options) {
  std::map<std::string, const RetrievalResult*> by_qid;
  for (const RetrievalResult& r : results) {
    if (!by_qid.emplace(r.qid, &r).second) {
      throw Error(ErrorKind::kValidation, "duplicate result for " + r.qid);
    }
  }
  if (by_qid.size() != queries.queries.size()) {
    throw Error(ErrorKind::kValidation,
                "qid mismatch: " + std::to_string(by_qid.size()) +
                    " results for " + std::to_string(queries.queries.size()) +
                    " queries");
  }

  MetricsReport report;
  report.options = options;
  report.per_bin.assign(options.bins.lower.size(), {});
  auto accumulate = [](MetricsAggregate& agg, const MetricsRow& row) {
    ++agg.count;
    agg.hit1 += row.hit1;
    agg.hit5 += row.hit5;
    agg.mrr += row.mrr;
    agg.r20 += row.r20;
    agg.dr20 += row.dr20;
  };
  for (const Query& q : queries.queries) {
    if (!by_qid.count(q.qid)) {
      throw Error(ErrorKind::kValidation, "qid mismatch: no result for " + q.qid);
    }
  }
  report.rows.resize(queries.queries.size());
  parallel_for(queries.queries.size(), options.jobs, [&](std::size_t i) {
    const Query& q = queries.queries[i];
    const RetrievalResult& r = *by_qid.at(q.qid);
    const auto ranked = r.ranked_nodes();
    const auto terminals = r.sample_terminals();
    MetricsRow& row = report.rows[i];
    row.qid = q.qid;
    row.num_targets = q.targets.size();
    row.bin = options.bins.bin_of(q.targets.size());
    row.hit1 = hit_at_k(ranked, q.targets, 1);
    row.hit5 = hit_at_k(ranked, q.targets, 5);
    row.mrr = mrr(ranked, q.targets);
    row.r20 = recall_at_k(terminals, q.targets, options.recall_k);
    row.dr20 = dedup_recall_at_k(terminals, q.targets, options.recall_k);
    if (options.answer_hook) {
      std::vector<std::string> docs;
      for (NodeIndex n : ranked) docs.push_back(graph.node(n).text);
      row.hook_score = options.answer_hook(q, docs);
    }
  });
  // Sums run in query order whatever the job count.
  for (const MetricsRow& row : report.rows) {
    accumulate(report.overall, row);
    accumulate(report.per_bin.at(static_cast<std::size_t>(row.bin - 1)), row);
  }
  auto finish = [](MetricsAggregate& agg) {
    if (agg.count == 0) return;
    const double n = static_cast<double>(agg.count);
    agg.hit1 /= n;
    agg.hit5 /= n;
    agg.mrr /= n;
    agg.r20 /= n;
    agg.dr20 /= n;
  };
  finish(report.overall);
  for (auto& b : report.per_bin) finish(b);
  return report;
}

std::string MetricsReport::to_csv() const {
  std::string out = "qid,num_targets,bin,hit@1,hit@5,mrr,r@20,d-r@20\n";
  for (const MetricsRow& r : rows) {
    out += r.qid + ',' + std::to_string(r.num_targets) + ',' +
           std::to_string(r.bin) + ',' + fmt(r.hit1) + ',' + fmt(r.hit5) +
           ',' + fmt(r.mrr) + ',' + fmt(r.r20) + ',' + fmt(r.dr20) + '\n';
  }
  return out;
}

std::string MetricsReport::to_json() const {
  using nlohmann::ordered_json;
  auto agg = [](const MetricsAggregate& a) {
    return ordered_json{{"count", a.count}, {"hit@1", a.hit1},
                        {"hit@5", a.hit5},  {"mrr", a.mrr},
                        {"r@20", a.r20},    {"d-r@20", a.dr20}};
  };
  ordered_json doc;
  ordered_json rows_json = ordered_json::array();
  for (const MetricsRow& r : rows) {
    ordered_json row = {{"qid", r.qid},   {"num_targets", r.num_targets},
                        {"bin", r.bin},   {"hit@1", r.hit1},
                        {"hit@5", r.hit5}, {"mrr", r.mrr},
                        {"r@20", r.r20},  {"d-r@20", r.dr20}};
    if (r.hook_score) row["hook_score"] = *r.hook_score;
    rows_json.push_back(std::move(row));
  }
  doc["rows"] = std::move(rows_json);
  doc["overall"] = agg(overall);
  ordered_json bins = ordered_json::array();
  for (std::size_t i = 0; i < per_bin.size(); ++i) {
    ordered_json b = agg(per_bin[i]);
    b["bin"] = i + 1;
    bins.push_back(std::move(b));
  }
  doc["per_bin"] = std::move(bins);
  doc["config"] = {{"bin_lower_edges", options.bins.lower},
                   {"recall_k", options.recall_k}};
  return doc.dump(2) + "\n";
}

}  // namespace graphflow
