#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "graphflow/featurize.hpp"
#include "graphflow/flow_model.hpp"
#include "graphflow/objectives.hpp"

namespace graphflow {

enum class Objective { kDble, kTb, kSubtb, kSft, kPrm };

const char* to_string(Objective o);
Objective parse_objective(std::string_view name);

struct TrainConfig {
  Objective objective = Objective::kDble;
  std::size_t num_exploration = 4;
  MdpConfig mdp;
  std::size_t batch_size = 1;
  std::size_t accumulation_steps = 2;
  double lr = 1e-3;
  std::size_t epochs = 1;
  std::size_t max_steps = 0;  // 0: no limit
  double eval_ratio = 0.8;
  std::size_t eval_step = 100;
  // Early exit once the full training loss drops to this value; 0 disables.
  double target_loss = 0.0;
  double boundary_const = 0.0;
  bool learn_initial_flow = true;
  bool learn_log_z = false;
  // Stand-in for log R when a candidate stops at a zero-reward node.
  double log_reward_floor = -10.0;
  std::uint64_t seed = 0;
  // Where to write the model if training hits a non-finite loss.
  std::string dump_path;
  EncoderConfig encoder;
  HiddenSpec hidden;
  RewardSpec reward;

  void validate() const;
  BoundaryConfig boundary() const;
  // Canonical key=value rendering; hashed into checkpoints.
  std::string to_key_values() const;
};

// Applies flat `key=value` settings (names follow the usual hyperparameter
// table: num_exploration, depth_cutoff, doc_cutoff, window_size, lr, ...).
void apply_config_value(TrainConfig& cfg, std::string_view key,
                        std::string_view value);
TrainConfig parse_train_config(std::string_view text,
                               TrainConfig base = TrainConfig{});

struct CollectedTrajectory {
  std::size_t id = 0;
  const Query* query = nullptr;
  NodeIndex target = 0;
  Trajectory trajectory;
};

struct CoverageReport {
  std::size_t requested = 0;
  std::size_t collected = 0;
  std::size_t unreachable = 0;      // no path within depth_cutoff
  std::size_t zero_reward = 0;      // reachable but R = 0 (Table mode)
};

struct Collection {
  std::vector<CollectedTrajectory> trajectories;
  CoverageReport coverage;
};

// One trajectory per (query, target): start at the top-1 seed node, follow a
// uniformly drawn shortest path to the target, then Stop.
Collection collect_trajectories(const Featurizer& featurizer,
                                const QuerySet& queries,
                                const RewardSpec& reward, std::uint64_t seed);

struct TransitionCandidate {
  Action action;
  State next;
  bool terminal = false;
  double reward = 0.0;  // terminal reward; 0 for moves
  bool ground_truth = false;
};

struct TransitionBatch {
  std::string qid;
  std::size_t trajectory_id = 0;
  State anchor;
  bool anchor_is_initial = false;
  std::vector<TransitionCandidate> candidates;  // [0] is the ground truth
};

// One batch per decision of the trajectory: the taken action plus up to `k`
// other legal actions drawn uniformly without replacement.
std::vector<TransitionBatch> expand_local_exploration(
    const Graph& graph, const CollectedTrajectory& traj,
    const RewardSpec& reward, std::size_t k, const MdpConfig& mdp,
    std::uint64_t seed);

struct PreferencePair {
  State state;
  Action positive;
  Action negative;
};

std::vector<PreferencePair> make_preference_pairs(
    const std::vector<TransitionBatch>& batches);

FeaturizedBatch featurize_batch(const Featurizer& featurizer,
                                const TransitionBatch& batch,
                                double log_reward_floor);
FeaturizedTrajectory featurize_trajectory(const Featurizer& featurizer,
                                          const Trajectory& traj);
FeaturizedPair featurize_pair(const Featurizer& featurizer,
                              const PreferencePair& pair);

struct LogRow {
  std::size_t step = 0;
  double transition_loss = 0.0;
  double start_loss = 0.0;
  double end_loss = 0.0;
  double total_loss = 0.0;
  double eval_loss = 0.0;        // NaN when the eval split is empty
  double eval_policy_acc = 0.0;  // NaN when the eval split is empty
};

struct TrainingLog {
  std::vector<LogRow> rows;

  std::string to_csv() const;
};

// A unit of training data for the configured objective: an exploration
// batch (dble, sft), a preference pair (prm) or a trajectory (tb, subtb).
struct Unit {
  std::string qid;
  std::size_t index = 0;
};

struct SetLoss {
  double transition = 0.0;
  double start = 0.0;
  double end = 0.0;
  double total = 0.0;
};

// Everything train() builds before optimizing: collected trajectories,
// exploration batches, preference pairs and the query-level train/eval split.
class TrainingData {
 public:
  TrainingData(const Graph& graph, const QuerySet& queries,
               const TrainConfig& cfg);
  ~TrainingData();
  TrainingData(const TrainingData&) = delete;
  TrainingData& operator=(const TrainingData&) = delete;

  const TrainConfig& config() const;
  const Featurizer& featurizer() const;
  const Collection& collection() const;
  const std::vector<TransitionBatch>& batches() const;
  const std::vector<Unit>& train_units() const;
  const std::vector<Unit>& eval_units() const;

  ObjectiveResult unit_loss(const Model& model, const Unit& unit) const;
  // NaN everywhere for an empty set.
  SetLoss mean_loss(const Model& model, const std::vector<Unit>& units) const;
  // Summed over the training split; what the gradient checker differentiates.
  LossAndGrad total_loss(const Model& model) const;
  // Share of eval batches whose top-scoring candidate is the taken action.
  double eval_policy_accuracy(const Model& model) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct TrainResult {
  Model model;
  TrainingLog log;
  CoverageReport coverage;
  std::size_t train_units = 0;
  std::size_t eval_units = 0;
  std::size_t steps = 0;
  bool converged = false;  // target_loss reached
};

TrainResult train(const Graph& graph, const QuerySet& queries,
                  const TrainConfig& cfg);

}  // namespace graphflow
