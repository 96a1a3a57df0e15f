#pragma once

#include <vector>

#include "graphflow/flow_model.hpp"

namespace graphflow {

// Flow boundary handling shared by the flow-based objectives.
//
// A stopped (terminal) state never goes through the flow head: its log-flow
// is `terminal_const + log R`, R being the reward of the node it stopped at
// (a zero reward is replaced by a finite floor when the batch is built).
// The initial state's log-flow is log Z of that query. It is either learned
// by the flow head or pinned to `initial_const`.
struct BoundaryConfig {
  double terminal_const = 0.0;
  double initial_const = 0.0;
  bool learn_initial_flow = true;
};

struct CandidateFeatures {
  FeatureVector action;      // policy-head input
  FeatureVector next_state;  // flow-head input, unused when terminal
  bool terminal = false;
  double terminal_log_reward = 0.0;
};

// One anchor state with its candidate transitions; candidate 0 is the ground
// truth.
struct FeaturizedBatch {
  FeatureVector anchor;
  bool anchor_is_initial = false;
  std::vector<CandidateFeatures> candidates;
};

struct FeaturizedStep {
  FeatureVector state;
  std::vector<FeatureVector> candidates;  // every legal action at the state
  std::size_t chosen = 0;
};

struct FeaturizedTrajectory {
  std::vector<FeaturizedStep> steps;  // last chosen action is Stop
  double reward = 0.0;
};

struct FeaturizedPair {
  FeatureVector positive;
  FeatureVector negative;
};

// Loss and gradient, plus the split of the loss into terms anchored at the
// initial state ("start"), terms landing in a terminal state ("end") and the
// rest ("transition"). The three parts sum to `loss`.
struct ObjectiveResult {
  double loss = 0.0;
  std::vector<double> grads;
  double transition = 0.0;
  double start = 0.0;
  double end = 0.0;
};

// Detailed balance with local exploration:
//   sum_i [logF(s) - logF(s'_i) + r(s, a_i) - logsumexp_j r(s, a_j)]^2
// normalized over the batch's candidates.
ObjectiveResult dble_loss(const Model& model, const FeaturizedBatch& batch,
                          const BoundaryConfig& boundary);

// Trajectory balance with unit backward policy:
//   [log Z + sum_t log P(a_t | s_t) - log R]^2, log Z = model.log_z().
ObjectiveResult tb_loss(const Model& model, const FeaturizedTrajectory& traj);

// Sub-trajectory balance over states i..j (0 <= i < j <= T, s_T stopped):
//   [logF(s_i) + sum_{t=i}^{j-1} log P(a_t | s_t) - logF(s_j)]^2
ObjectiveResult subtb_loss(const Model& model,
                           const FeaturizedTrajectory& traj, std::size_t i,
                           std::size_t j, const BoundaryConfig& boundary);

// Behavior cloning: -log softmax probability of candidate 0.
ObjectiveResult sft_loss(const Model& model, const FeaturizedBatch& batch);

// Pairwise process-reward loss: softplus(-(r+ - r-)).
ObjectiveResult prm_loss(const Model& model, const FeaturizedPair& pair);

// Stable log(1 + e^x).
double softplus(double x);

}  // namespace graphflow
