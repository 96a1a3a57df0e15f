#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace graphflow {

using NodeIndex = std::uint32_t;

struct NodeRecord {
  std::string id;
  std::string text;
  std::string node_type;
};

// A stored (directed) edge as it appears in the input file.
struct EdgeRecord {
  NodeIndex src;
  NodeIndex dst;
  std::string relation;
};

struct Neighbor {
  std::string relation;
  NodeIndex node;
};

// Suffix appended to a relation label when an edge is walked against its
// stored direction.
inline constexpr std::string_view kReverseMarker = "^-1";

// Text-attributed directed multigraph. Immutable once built; edges are
// traversable both ways.
class Graph {
 public:
  Graph() = default;

  // Builds the graph and its adjacency; throws Error on duplicate ids or
  // dangling edge endpoints.
  static Graph build(std::string name, std::vector<NodeRecord> nodes,
                     std::vector<EdgeRecord> edges);

  const std::string& name() const { return name_; }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  const NodeRecord& node(NodeIndex index) const { return nodes_.at(index); }
  const std::vector<NodeRecord>& nodes() const { return nodes_; }
  const std::vector<EdgeRecord>& edges() const { return edges_; }

  std::optional<NodeIndex> find(std::string_view id) const;
  NodeIndex index_of(std::string_view id) const;  // throws kNotFound

  // Sorted by (relation label, neighbor id).
  std::span<const Neighbor> neighbors(NodeIndex node) const;
  std::vector<std::pair<std::string, std::string>> neighbors(
      std::string_view id) const;

  bool adjacent(NodeIndex from, NodeIndex to) const;

  // Escape hatch for tests of validate_graph(); not part of normal use.
  std::vector<std::vector<Neighbor>>& mutable_adjacency_for_testing() {
    return adjacency_;
  }

 private:
  std::string name_;
  std::vector<NodeRecord> nodes_;
  std::vector<EdgeRecord> edges_;
  std::vector<std::vector<Neighbor>> adjacency_;
  std::unordered_map<std::string, NodeIndex> index_;
};

struct Query {
  std::string qid;
  std::string text;
  std::vector<NodeIndex> targets;  // sorted, unique
};

struct QuerySet {
  std::vector<Query> queries;

  const Query& by_qid(std::string_view qid) const;  // throws kNotFound
};

struct DegreeStats {
  std::size_t min = 0;
  std::size_t max = 0;
  double mean = 0.0;
};

struct ValidationReport {
  bool valid = true;
  std::vector<std::string> issues;    // make valid=false
  std::vector<std::string> warnings;  // informational
  std::size_t empty_documents = 0;
  std::size_t dangling_references = 0;
  std::size_t duplicate_ids = 0;
  DegreeStats degree;
};

Graph load_graph(const std::filesystem::path& path);
Graph parse_graph_jsonl(std::string_view content, std::string name = {});
void save_graph(const Graph& graph, const std::filesystem::path& path);
std::string graph_to_jsonl(const Graph& graph);

ValidationReport validate_graph(const Graph& graph);

QuerySet load_queries(const std::filesystem::path& path, const Graph& graph);
QuerySet parse_queries_jsonl(std::string_view content, const Graph& graph);
std::string queries_to_jsonl(const QuerySet& queries, const Graph& graph);
void save_queries(const QuerySet& queries, const Graph& graph,
                  const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace graphflow
