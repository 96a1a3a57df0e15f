#include "graphflow/oracle.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "graphflow/error.hpp"

namespace graphflow {

Enumeration enumerate_trajectories(const Graph& graph, const QueryRef& query,
                                   NodeIndex seed, const MdpConfig& mdp,
                                   const RewardSpec& reward,
                                   const std::vector<NodeIndex>& targets,
                                   std::size_t budget) {
  Enumeration e;
  e.query = query;
  e.mdp = mdp;
  const State root = initial_state(graph, query, seed);

  // Iterative preorder DFS so deep cutoffs cannot overflow the stack.
  struct Frame {
    State state;
    int parent;
  };
  std::vector<Frame> stack{{root, -1}};
  while (!stack.empty()) {
    Frame frame = std::move(stack.back());
    stack.pop_back();
    if (e.states.size() >= budget) {
      throw Error(ErrorKind::kBudgetExceeded,
                  "state tree exceeds budget of " + std::to_string(budget));
    }
    const int index = static_cast<int>(e.states.size());
    TreeState ts;
    ts.path = frame.state.path;
    ts.parent = frame.parent;
    ts.stop_reward = reward.terminal_reward(frame.state.current(), targets);
    e.states.push_back(std::move(ts));
    if (frame.parent >= 0) e.states[frame.parent].children.push_back(index);

    const auto actions = candidate_actions(graph, frame.state, mdp);
    // Push in reverse so children are visited (and numbered) in candidate
    // order.
    for (auto it = actions.rbegin(); it != actions.rend(); ++it) {
      if (it->is_stop()) continue;
      State next = frame.state;
      next.path.push_back(it->target);
      stack.push_back({std::move(next), index});
    }
  }
  return e;
}

FlowTable exact_flows(const Enumeration& enumeration) {
  FlowTable table;
  table.enumeration_ = &enumeration;
  const auto& states = enumeration.states;
  const std::size_t n = states.size();
  if (n == 0) throw Error(ErrorKind::kInvalidArgument, "empty enumeration");

  // Preorder numbering puts every child after its parent.
  table.flows_.assign(n, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    double f = states[i].stop_reward;
    for (int c : states[i].children) f += table.flows_[c];
    table.flows_[i] = f;
  }

  // Independent route: push each trajectory's reward up its ancestor chain.
  std::vector<double> direct(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (int a = static_cast<int>(i); a >= 0; a = states[a].parent) {
      direct[a] += states[i].stop_reward;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    table.crosscheck_error_ = std::max(
        table.crosscheck_error_, std::abs(direct[i] - table.flows_[i]));
    table.index_.emplace(states[i].path, i);
  }
  if (!(table.flows_[0] > 0.0)) {
    throw Error(ErrorKind::kNumerical,
                "partition Z = 0: no positive-reward trajectory");
  }
  return table;
}

std::size_t FlowTable::index_of(const std::vector<NodeIndex>& path) const {
  auto it = index_.find(path);
  if (it == index_.end()) {
    throw Error(ErrorKind::kNotFound, "state not in the enumerated tree");
  }
  return it->second;
}

double FlowTable::conservation_error() const {
  double worst = 0.0;
  const auto& states = enumeration_->states;
  for (std::size_t i = 0; i < states.size(); ++i) {
    double rhs = states[i].stop_reward;
    for (int c : states[i].children) rhs += flows_[c];
    worst = std::max(worst, std::abs(flows_[i] - rhs));
  }
  return worst;
}

std::vector<double> exact_policy(const FlowTable& table,
                                 std::size_t state_index) {
  const TreeState& s = table.enumeration().states.at(state_index);
  const double f = table.flow(state_index);
  if (!(f > 0.0)) {
    throw Error(ErrorKind::kNumerical, "exact_policy at a zero-flow state");
  }
  std::vector<double> probs{s.stop_reward / f};
  for (int c : s.children) probs.push_back(table.flow(c) / f);
  return probs;
}

std::vector<double> exact_policy(const FlowTable& table,
                                 const std::vector<NodeIndex>& path) {
  return exact_policy(table, table.index_of(path));
}

std::vector<double> trajectory_probabilities(const FlowTable& table) {
  const auto& states = table.enumeration().states;
  std::vector<double> out(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    out[i] = states[i].stop_reward / table.partition();
  }
  return out;
}

std::map<NodeIndex, double> terminal_distribution(const FlowTable& table) {
  const auto& states = table.enumeration().states;
  const auto probs = trajectory_probabilities(table);
  std::map<NodeIndex, double> out;
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (probs[i] > 0.0) out[states[i].path.back()] += probs[i];
  }
  return out;
}

DistributionDistance distribution_distance(
    const std::map<NodeIndex, double>& empirical,
    const std::map<NodeIndex, double>& exact) {
  double total = 0.0;
  for (const auto& [node, p] : empirical) total += p;
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(ErrorKind::kInvalidArgument,
                "empirical frequencies must sum to 1");
  }
  std::map<NodeIndex, double> diff = empirical;
  for (const auto& [node, q] : exact) diff[node] -= q;
  DistributionDistance d;
  for (const auto& [node, v] : diff) d.l1 += std::abs(v);
  d.total_variation = 0.5 * d.l1;
  return d;
}

std::string oracle_to_json(const FlowTable& table, const Graph& graph) {
  using nlohmann::ordered_json;
  const Enumeration& e = table.enumeration();
  const auto probs = trajectory_probabilities(table);
  auto ids = [&](const std::vector<NodeIndex>& path) {
    ordered_json arr = ordered_json::array();
    for (NodeIndex n : path) arr.push_back(graph.node(n).id);
    return arr;
  };
  ordered_json trajectories = ordered_json::array();
  for (std::size_t i = 0; i < e.states.size(); ++i) {
    trajectories.push_back({{"path", ids(e.states[i].path)},
                            {"reward", e.states[i].stop_reward},
                            {"p", probs[i]},
                            {"flow", table.flow(i)}});
  }
  ordered_json terminals = ordered_json::object();
  for (const auto& [node, p] : terminal_distribution(table)) {
    terminals[graph.node(node).id] = p;
  }
  ordered_json doc = {{"qid", e.query.qid},
                      {"seed", graph.node(e.states[0].path[0]).id},
                      {"depth_cutoff", e.mdp.depth_cutoff},
                      {"allow_revisits", e.mdp.allow_revisits},
                      {"partition", table.partition()},
                      {"terminal_distribution", terminals},
                      {"trajectories", trajectories}};
  return doc.dump(2) + "\n";
}

}  // namespace graphflow
