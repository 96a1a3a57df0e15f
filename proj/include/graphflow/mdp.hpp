#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "graphflow/kg_store.hpp"

namespace graphflow {

struct MdpConfig {
  int depth_cutoff = 6;
  // Retrieval never backtracks by default: a move may not return to a node
  // already on the path.
  bool allow_revisits = false;

  bool operator==(const MdpConfig&) const = default;
};

struct QueryRef {
  std::string qid;
  std::string text;

  bool operator==(const QueryRef&) const = default;
  auto operator<=>(const QueryRef&) const = default;
};

// A partial retrieval: the query plus every node visited so far. Because the
// full path is part of the identity, the reachable state space is a tree.
struct State {
  QueryRef query;
  std::vector<NodeIndex> path;
  bool stopped = false;

  int depth() const { return static_cast<int>(path.size()) - 1; }
  NodeIndex current() const { return path.back(); }

  bool operator==(const State&) const = default;
  auto operator<=>(const State&) const = default;
};

struct StateHash {
  std::size_t operator()(const State& s) const;
};

struct Action {
  enum class Kind { kStop, kMove };

  Kind kind = Kind::kStop;
  std::string relation;  // empty for Stop
  NodeIndex target = 0;  // unused for Stop

  static Action stop() { return {}; }
  static Action move(std::string relation, NodeIndex target) {
    return {Kind::kMove, std::move(relation), target};
  }
  bool is_stop() const { return kind == Kind::kStop; }

  bool operator==(const Action&) const = default;
};

// One decision along a trajectory: the state it was taken in, the full
// candidate set offered there, and which candidate was chosen.
struct Step {
  State state;
  std::vector<Action> candidates;
  std::size_t chosen = 0;

  const Action& action() const { return candidates.at(chosen); }
};

struct Trajectory {
  QueryRef query;
  std::vector<Step> steps;  // last step's action is Stop
  State final_state;        // stopped
  double reward = 0.0;

  NodeIndex terminal() const { return final_state.current(); }
  std::size_t length() const { return steps.size(); }
};

struct RewardSpec {
  enum class Mode { kBinary, kTable };

  Mode mode = Mode::kBinary;
  std::map<NodeIndex, double> table;  // kTable: positive values

  static RewardSpec binary() { return {}; }
  static RewardSpec from_table(std::map<NodeIndex, double> table);

  // Reward of terminating at `node`.
  double terminal_reward(NodeIndex node,
                         const std::vector<NodeIndex>& targets) const;
};

State initial_state(const Graph& graph, QueryRef query, NodeIndex seed);

// Stop first, then moves in neighbor order; only Stop once the depth cutoff
// is reached.
std::vector<Action> candidate_actions(const Graph& graph, const State& state,
                                      const MdpConfig& cfg);

State apply_action(const Graph& graph, const State& state,
                   const Action& action, const MdpConfig& cfg);

// Builds a stopped trajectory that follows `path` then stops. Throws if any
// step is illegal.
Trajectory trajectory_from_path(const Graph& graph, const QueryRef& query,
                                const std::vector<NodeIndex>& path,
                                const MdpConfig& cfg);

double trajectory_reward(const Trajectory& trajectory,
                         const std::vector<NodeIndex>& targets,
                         const RewardSpec& spec);

}  // namespace graphflow
