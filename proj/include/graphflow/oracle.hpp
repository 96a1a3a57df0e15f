#pragma once

#include <map>
#include <string>
#include <vector>

#include "graphflow/mdp.hpp"

namespace graphflow {

// One node of the full-path state tree rooted at the seed.
struct TreeState {
  std::vector<NodeIndex> path;
  int parent = -1;
  std::vector<int> children;  // aligned with the Move candidates, in order
  double stop_reward = 0.0;   // reward for stopping here
};

// Every trajectory from the seed: one per tree state (stop there).
struct Enumeration {
  QueryRef query;
  MdpConfig mdp;
  std::vector<TreeState> states;  // preorder; states[0] is the root

  std::size_t trajectory_count() const { return states.size(); }
};

inline constexpr std::size_t kDefaultOracleBudget = 100000;

Enumeration enumerate_trajectories(const Graph& graph, const QueryRef& query,
                                   NodeIndex seed, const MdpConfig& mdp,
                                   const RewardSpec& reward,
                                   const std::vector<NodeIndex>& targets,
                                   std::size_t budget = kDefaultOracleBudget);

// Exact flows on the state tree: F(s) = R_stop(s) + sum over children F(c),
// i.e. the total reward of the trajectories passing through s.
class FlowTable {
 public:
  const Enumeration& enumeration() const { return *enumeration_; }
  double partition() const { return flows_.front(); }
  double flow(std::size_t state_index) const { return flows_.at(state_index); }
  const std::vector<double>& flows() const { return flows_; }

  // Index of the tree state with this path; throws kNotFound.
  std::size_t index_of(const std::vector<NodeIndex>& path) const;

  // Largest gap between the bottom-up flows and a direct per-trajectory sum.
  double crosscheck_error() const { return crosscheck_error_; }

  // Largest |F(s) - R_stop(s) - sum F(children)| over all states.
  double conservation_error() const;

  friend FlowTable exact_flows(const Enumeration& enumeration);

 private:
  const Enumeration* enumeration_ = nullptr;
  std::vector<double> flows_;
  std::map<std::vector<NodeIndex>, std::size_t> index_;
  double crosscheck_error_ = 0.0;
};

// Throws kNumerical when Z = 0. The table keeps a pointer to `enumeration`.
FlowTable exact_flows(const Enumeration& enumeration);

// P(Stop) = R_stop(s)/F(s), P(move to c) = F(c)/F(s); aligned with
// candidate_actions(). Throws when F(s) = 0.
std::vector<double> exact_policy(const FlowTable& table,
                                 std::size_t state_index);
std::vector<double> exact_policy(const FlowTable& table,
                                 const std::vector<NodeIndex>& path);

// Reward-proportional trajectory probabilities R(tau)/Z, indexed like
// enumeration().states.
std::vector<double> trajectory_probabilities(const FlowTable& table);

// P* marginalized onto the terminal node.
std::map<NodeIndex, double> terminal_distribution(const FlowTable& table);

struct DistributionDistance {
  double total_variation = 0.0;
  double l1 = 0.0;
};

// Frequencies must sum to 1 within 1e-9.
DistributionDistance distribution_distance(
    const std::map<NodeIndex, double>& empirical,
    const std::map<NodeIndex, double>& exact);

// Golden-file dump of trajectories, rewards, P* and flows.
std::string oracle_to_json(const FlowTable& table, const Graph& graph);

}  // namespace graphflow
