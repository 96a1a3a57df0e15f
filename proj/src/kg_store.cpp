#include "graphflow/kg_store.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "graphflow/error.hpp"

namespace graphflow {

using nlohmann::json;

namespace {

bool neighbor_less(const std::vector<NodeRecord>& nodes, const Neighbor& a,
                   const Neighbor& b) {
  if (a.relation != b.relation) return a.relation < b.relation;
  return nodes[a.node].id < nodes[b.node].id;
}

std::string get_string(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    throw Error(ErrorKind::kParse, "line " + std::to_string(line) +
                                       ": missing string field '" + key + "'");
  }
  return it->get<std::string>();
}

// Calls `fn(line_number, object)` for every non-blank line.
template <typename Fn>
void for_each_jsonl(std::string_view content, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
      throw Error(ErrorKind::kParse,
                  "line " + std::to_string(line_no) + ": malformed JSON");
    }
    fn(line_no, obj);
  }
}

}  // namespace

Graph Graph::build(std::string name, std::vector<NodeRecord> nodes,
                   std::vector<EdgeRecord> edges) {
  Graph g;
  g.name_ = std::move(name);
  g.nodes_ = std::move(nodes);
  g.edges_ = std::move(edges);
  g.index_.reserve(g.nodes_.size());
  for (std::size_t i = 0; i < g.nodes_.size(); ++i) {
    if (g.nodes_[i].id.empty()) {
      throw Error(ErrorKind::kValidation, "empty node id");
    }
    auto [it, inserted] =
        g.index_.emplace(g.nodes_[i].id, static_cast<NodeIndex>(i));
    if (!inserted) {
      throw Error(ErrorKind::kValidation,
                  "duplicate node id " + g.nodes_[i].id);
    }
  }
  g.adjacency_.assign(g.nodes_.size(), {});
  for (const EdgeRecord& e : g.edges_) {
    if (e.src >= g.nodes_.size() || e.dst >= g.nodes_.size()) {
      throw Error(ErrorKind::kValidation, "edge endpoint out of range");
    }
    g.adjacency_[e.src].push_back({e.relation, e.dst});
    g.adjacency_[e.dst].push_back(
        {e.relation + std::string(kReverseMarker), e.src});
  }
  for (auto& list : g.adjacency_) {
    std::sort(list.begin(), list.end(),
              [&](const Neighbor& a, const Neighbor& b) {
                return neighbor_less(g.nodes_, a, b);
              });
  }
  return g;
}

std::optional<NodeIndex> Graph::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

NodeIndex Graph::index_of(std::string_view id) const {
  auto found = find(id);
  if (!found) {
    throw Error(ErrorKind::kNotFound, "unknown node " + std::string(id));
  }
  return *found;
}

std::span<const Neighbor> Graph::neighbors(NodeIndex node) const {
  if (node >= adjacency_.size()) {
    throw Error(ErrorKind::kNotFound,
                "unknown node index " + std::to_string(node));
  }
  return adjacency_[node];
}

std::vector<std::pair<std::string, std::string>> Graph::neighbors(
    std::string_view id) const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const Neighbor& n : neighbors(index_of(id))) {
    out.emplace_back(n.relation, nodes_[n.node].id);
  }
  return out;
}

bool Graph::adjacent(NodeIndex from, NodeIndex to) const {
  for (const Neighbor& n : neighbors(from)) {
    if (n.node == to) return true;
  }
  return false;
}

const Query& QuerySet::by_qid(std::string_view qid) const {
  for (const Query& q : queries) {
    if (q.qid == qid) return q;
  }
  throw Error(ErrorKind::kNotFound, "unknown qid " + std::string(qid));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::kIo, "cannot open " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorKind::kIo, "cannot write " + path.string());
  }
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

Graph parse_graph_jsonl(std::string_view content, std::string name) {
  std::vector<NodeRecord> nodes;
  std::unordered_map<std::string, NodeIndex> ids;
  struct PendingEdge {
    std::size_t line;
    std::string src, dst, rel;
  };
  std::vector<PendingEdge> pending;

  for_each_jsonl(content, [&](std::size_t line, const json& obj) {
    const std::string kind = get_string(obj, "kind", line);
    if (kind == "node") {
      NodeRecord rec{get_string(obj, "id", line), get_string(obj, "text", line),
                     get_string(obj, "type", line)};
      if (rec.id.empty()) {
        throw Error(ErrorKind::kParse,
                    "line " + std::to_string(line) + ": empty node id");
      }
      if (!ids.emplace(rec.id, static_cast<NodeIndex>(nodes.size())).second) {
        throw Error(ErrorKind::kValidation, "line " + std::to_string(line) +
                                                ": duplicate node id " +
                                                rec.id);
      }
      nodes.push_back(std::move(rec));
    } else if (kind == "edge") {
      pending.push_back({line, get_string(obj, "src", line),
                         get_string(obj, "dst", line),
                         get_string(obj, "rel", line)});
    } else {
      throw Error(ErrorKind::kParse, "line " + std::to_string(line) +
                                         ": unknown kind '" + kind + "'");
    }
  });

  // Edges may precede the node lines they reference.
  std::vector<EdgeRecord> edges;
  edges.reserve(pending.size());
  for (const PendingEdge& e : pending) {
    auto s = ids.find(e.src);
    auto d = ids.find(e.dst);
    if (s == ids.end() || d == ids.end()) {
      const std::string& missing = s == ids.end() ? e.src : e.dst;
      throw Error(ErrorKind::kValidation, "line " + std::to_string(e.line) +
                                              ": unknown node " + missing);
    }
    edges.push_back({s->second, d->second, e.rel});
  }
  return Graph::build(std::move(name), std::move(nodes), std::move(edges));
}

Graph load_graph(const std::filesystem::path& path) {
  return parse_graph_jsonl(read_file(path), path.stem().string());
}

std::string graph_to_jsonl(const Graph& graph) {
  std::string out;
  for (const NodeRecord& n : graph.nodes()) {
    json obj = {{"kind", "node"}, {"id", n.id}, {"text", n.text},
                {"type", n.node_type}};
    out += obj.dump();
    out += '\n';
  }
  for (const EdgeRecord& e : graph.edges()) {
    json obj = {{"kind", "edge"},
                {"src", graph.node(e.src).id},
                {"dst", graph.node(e.dst).id},
                {"rel", e.relation}};
    out += obj.dump();
    out += '\n';
  }
  return out;
}

void save_graph(const Graph& graph, const std::filesystem::path& path) {
  write_file(path, graph_to_jsonl(graph));
}

ValidationReport validate_graph(const Graph& graph) {
  ValidationReport report;
  const auto& nodes = graph.nodes();
  std::set<std::string> seen;
  for (const NodeRecord& n : nodes) {
    if (!seen.insert(n.id).second) {
      ++report.duplicate_ids;
      report.issues.push_back("duplicate node id " + n.id);
    }
    if (n.text.empty()) {
      ++report.empty_documents;
      report.warnings.push_back("empty document at node " + n.id);
    }
  }

  std::size_t degree_sum = 0;
  report.degree.min = nodes.empty() ? 0 : SIZE_MAX;
  for (NodeIndex i = 0; i < nodes.size(); ++i) {
    auto list = graph.neighbors(i);
    for (std::size_t j = 0; j < list.size(); ++j) {
      if (list[j].node >= nodes.size()) {
        ++report.dangling_references;
        report.issues.push_back("dangling neighbor of " + nodes[i].id);
        continue;
      }
      if (j > 0 && list[j - 1].node < nodes.size()) {
        const Neighbor& prev = list[j - 1];
        const bool ordered =
            prev.relation < list[j].relation ||
            (prev.relation == list[j].relation &&
             nodes[prev.node].id <= nodes[list[j].node].id);
        if (!ordered) {
          report.issues.push_back("unsorted adjacency at " + nodes[i].id);
        }
      }
    }
    report.degree.min = std::min(report.degree.min, list.size());
    report.degree.max = std::max(report.degree.max, list.size());
    degree_sum += list.size();
  }
  for (const EdgeRecord& e : graph.edges()) {
    if (e.src >= nodes.size() || e.dst >= nodes.size()) {
      ++report.dangling_references;
      report.issues.push_back("dangling edge");
    }
  }
  if (!nodes.empty()) {
    report.degree.mean =
        static_cast<double>(degree_sum) / static_cast<double>(nodes.size());
  }
  report.valid = report.issues.empty();
  return report;
}

QuerySet parse_queries_jsonl(std::string_view content, const Graph& graph) {
  QuerySet set;
  std::set<std::string> qids;
  for_each_jsonl(content, [&](std::size_t line, const json& obj) {
    Query q;
    q.qid = get_string(obj, "qid", line);
    q.text = get_string(obj, "text", line);
    const std::string where = "line " + std::to_string(line) + ": ";
    if (!qids.insert(q.qid).second) {
      throw Error(ErrorKind::kValidation, where + "duplicate qid " + q.qid);
    }
    auto it = obj.find("targets");
    if (it == obj.end() || !it->is_array()) {
      throw Error(ErrorKind::kParse, where + "missing targets array");
    }
    for (const json& t : *it) {
      if (!t.is_string()) {
        throw Error(ErrorKind::kParse, where + "target ids must be strings");
      }
      auto idx = graph.find(t.get<std::string>());
      if (!idx) {
        throw Error(ErrorKind::kValidation,
                    where + "unknown target " + t.get<std::string>());
      }
      q.targets.push_back(*idx);
    }
    if (q.targets.empty()) {
      throw Error(ErrorKind::kValidation, where + "empty target list");
    }
    std::sort(q.targets.begin(), q.targets.end());
    q.targets.erase(std::unique(q.targets.begin(), q.targets.end()),
                    q.targets.end());
    set.queries.push_back(std::move(q));
  });
  return set;
}

QuerySet load_queries(const std::filesystem::path& path, const Graph& graph) {
  return parse_queries_jsonl(read_file(path), graph);
}

std::string queries_to_jsonl(const QuerySet& queries, const Graph& graph) {
  std::string out;
  for (const Query& q : queries.queries) {
    json targets = json::array();
    for (NodeIndex t : q.targets) targets.push_back(graph.node(t).id);
    json obj = {{"qid", q.qid}, {"text", q.text}, {"targets", targets}};
    out += obj.dump();
    out += '\n';
  }
  return out;
}

void save_queries(const QuerySet& queries, const Graph& graph,
                  const std::filesystem::path& path) {
  write_file(path, queries_to_jsonl(queries, graph));
}

}  // namespace graphflow
