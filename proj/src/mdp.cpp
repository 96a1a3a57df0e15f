#include "graphflow/mdp.hpp"

#include <algorithm>

#include "graphflow/error.hpp"
#include "graphflow/rng.hpp"

namespace graphflow {

std::size_t StateHash::operator()(const State& s) const {
  std::uint64_t h = hash_string(0, s.query.qid);
  for (NodeIndex n : s.path) h = hash_combine(h, n);
  return static_cast<std::size_t>(hash_combine(h, s.stopped ? 1 : 0));
}

RewardSpec RewardSpec::from_table(std::map<NodeIndex, double> table) {
  for (const auto& [node, value] : table) {
    if (!(value > 0.0)) {
      throw Error(ErrorKind::kInvalidArgument,
                  "reward table values must be positive");
    }
  }
  RewardSpec spec;
  spec.mode = Mode::kTable;
  spec.table = std::move(table);
  return spec;
}

double RewardSpec::terminal_reward(
    NodeIndex node, const std::vector<NodeIndex>& targets) const {
  if (mode == Mode::kTable) {
    auto it = table.find(node);
    return it == table.end() ? 0.0 : it->second;
  }
  return std::binary_search(targets.begin(), targets.end(), node) ? 1.0 : 0.0;
}

State initial_state(const Graph& graph, QueryRef query, NodeIndex seed) {
  if (seed >= graph.node_count()) {
    throw Error(ErrorKind::kNotFound,
                "unknown seed node index " + std::to_string(seed));
  }
  return State{std::move(query), {seed}, false};
}

std::vector<Action> candidate_actions(const Graph& graph, const State& state,
                                      const MdpConfig& cfg) {
  if (state.stopped) {
    throw Error(ErrorKind::kInvalidArgument,
                "candidate_actions on a stopped state");
  }
  std::vector<Action> out{Action::stop()};
  if (state.depth() >= cfg.depth_cutoff) return out;
  for (const Neighbor& n : graph.neighbors(state.current())) {
    if (!cfg.allow_revisits &&
        std::find(state.path.begin(), state.path.end(), n.node) !=
            state.path.end()) {
      continue;
    }
    out.push_back(Action::move(n.relation, n.node));
  }
  return out;
}

State apply_action(const Graph& graph, const State& state,
                   const Action& action, const MdpConfig& cfg) {
  const auto legal = candidate_actions(graph, state, cfg);
  if (std::find(legal.begin(), legal.end(), action) == legal.end()) {
    throw Error(ErrorKind::kInvalidArgument, "illegal action");
  }
  State next = state;
  if (action.is_stop()) {
    next.stopped = true;
  } else {
    next.path.push_back(action.target);
  }
  return next;
}

Trajectory trajectory_from_path(const Graph& graph, const QueryRef& query,
                                const std::vector<NodeIndex>& path,
                                const MdpConfig& cfg) {
  if (path.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "empty path");
  }
  Trajectory traj;
  traj.query = query;
  State state = initial_state(graph, query, path.front());
  for (std::size_t i = 0; i <= path.size() - 1; ++i) {
    Step step{state, candidate_actions(graph, state, cfg), 0};
    std::optional<std::size_t> chosen;
    for (std::size_t c = 0; c < step.candidates.size(); ++c) {
      const Action& a = step.candidates[c];
      const bool match = i + 1 == path.size()
                             ? a.is_stop()
                             : (!a.is_stop() && a.target == path[i + 1]);
      if (match) {
        chosen = c;
        break;
      }
    }
    if (!chosen) {
      throw Error(ErrorKind::kInvalidArgument,
                  "path step " + std::to_string(i) + " is not a legal move");
    }
    step.chosen = *chosen;
    state = apply_action(graph, state, step.action(), cfg);
    traj.steps.push_back(std::move(step));
  }
  traj.final_state = std::move(state);
  return traj;
}

double trajectory_reward(const Trajectory& trajectory,
                         const std::vector<NodeIndex>& targets,
                         const RewardSpec& spec) {
  if (!trajectory.final_state.stopped) {
    throw Error(ErrorKind::kInvalidArgument,
                "trajectory_reward on a non-terminated trajectory");
  }
  return spec.terminal_reward(trajectory.terminal(), targets);
}

}  // namespace graphflow
