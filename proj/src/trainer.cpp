#include "graphflow/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <sstream>

#include "graphflow/error.hpp"
#include "graphflow/rng.hpp"

namespace graphflow {

const char* to_string(Objective o) {
  switch (o) {
    case Objective::kDble:
      return "dble";
    case Objective::kTb:
      return "tb";
    case Objective::kSubtb:
      return "subtb";
    case Objective::kSft:
      return "sft";
    case Objective::kPrm:
      return "prm";
  }
  return "?";
}

Objective parse_objective(std::string_view name) {
  for (Objective o : {Objective::kDble, Objective::kTb, Objective::kSubtb,
                      Objective::kSft, Objective::kPrm}) {
    if (name == to_string(o)) return o;
  }
  throw Error(ErrorKind::kInvalidArgument,
              "unknown objective " + std::string(name));
}

// ---------------------------------------------------------------------------
// Config

void TrainConfig::validate() const {
  encoder.validate();
  if (!(eval_ratio > 0.0 && eval_ratio < 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "eval_ratio must be in (0, 1)");
  }
  if (batch_size < 1 || accumulation_steps < 1) {
    throw Error(ErrorKind::kInvalidArgument,
                "batch_size and accumulation_steps must be >= 1");
  }
  if (eval_step < 1) {
    throw Error(ErrorKind::kInvalidArgument, "eval_step must be >= 1");
  }
  if (mdp.depth_cutoff < 0) {
    throw Error(ErrorKind::kInvalidArgument, "depth_cutoff must be >= 0");
  }
  if (!(lr > 0.0)) throw Error(ErrorKind::kInvalidArgument, "lr must be > 0");
}

BoundaryConfig TrainConfig::boundary() const {
  return {boundary_const, boundary_const, learn_initial_flow};
}

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorKind::kInvalidArgument, "bad value for " +
                                                 std::string(key) + ": " +
                                                 std::string(value));
  }
  return out;
}

double parse_real(std::string_view key, std::string_view value) {
  // from_chars for double is missing on some toolchains; strtod is exact.
  std::string s(value);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw Error(ErrorKind::kInvalidArgument,
                "bad value for " + std::string(key) + ": " + s);
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw Error(ErrorKind::kInvalidArgument,
              "bad boolean for " + std::string(key));
}

template <typename T>
std::vector<T> parse_list(std::string_view key, std::string_view value) {
  std::vector<T> out;
  std::size_t pos = 0;
  while (pos <= value.size()) {
    std::size_t comma = value.find(',', pos);
    if (comma == std::string_view::npos) comma = value.size();
    std::string_view item = value.substr(pos, comma - pos);
    if (!item.empty()) out.push_back(parse_number<T>(key, item));
    pos = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void apply_config_value(TrainConfig& cfg, std::string_view key,
                        std::string_view value) {
  if (key == "objective") {
    cfg.objective = parse_objective(value);
  } else if (key == "num_exploration") {
    cfg.num_exploration = parse_number<std::size_t>(key, value);
  } else if (key == "depth_cutoff") {
    cfg.mdp.depth_cutoff = parse_number<int>(key, value);
  } else if (key == "allow_revisits") {
    cfg.mdp.allow_revisits = parse_bool(key, value);
  } else if (key == "batch_size") {
    cfg.batch_size = parse_number<std::size_t>(key, value);
  } else if (key == "accumulation_steps") {
    cfg.accumulation_steps = parse_number<std::size_t>(key, value);
  } else if (key == "lr") {
    cfg.lr = parse_real(key, value);
  } else if (key == "n_epochs" || key == "epochs") {
    cfg.epochs = parse_number<std::size_t>(key, value);
  } else if (key == "max_steps") {
    cfg.max_steps = parse_number<std::size_t>(key, value);
  } else if (key == "eval_ratio") {
    cfg.eval_ratio = parse_real(key, value);
  } else if (key == "eval_step") {
    cfg.eval_step = parse_number<std::size_t>(key, value);
  } else if (key == "target_loss") {
    cfg.target_loss = parse_real(key, value);
  } else if (key == "boundary_const") {
    cfg.boundary_const = parse_real(key, value);
  } else if (key == "learn_initial_flow") {
    cfg.learn_initial_flow = parse_bool(key, value);
  } else if (key == "learn_log_z") {
    cfg.learn_log_z = parse_bool(key, value);
  } else if (key == "log_reward_floor") {
    cfg.log_reward_floor = parse_real(key, value);
  } else if (key == "seed") {
    cfg.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "dim") {
    cfg.encoder.dim = parse_number<std::size_t>(key, value);
  } else if (key == "ngram_orders") {
    cfg.encoder.ngram_orders = parse_list<int>(key, value);
  } else if (key == "doc_cutoff") {
    cfg.encoder.doc_cutoff = parse_number<std::size_t>(key, value);
  } else if (key == "window_size") {
    cfg.encoder.window_size = parse_number<std::size_t>(key, value);
  } else if (key == "hash_seed") {
    cfg.encoder.hash_seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "hidden") {
    cfg.hidden.layers = value == "none" ? std::vector<std::size_t>{}
                                        : parse_list<std::size_t>(key, value);
  } else if (key == "activation") {
    cfg.hidden.activation = parse_activation(value);
  } else {
    throw Error(ErrorKind::kInvalidArgument,
                "unknown config key " + std::string(key));
  }
}

TrainConfig parse_train_config(std::string_view text, TrainConfig base) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::kParse,
                  "config line " + std::to_string(line_no) + ": missing '='");
    }
    apply_config_value(base, trim(line.substr(0, eq)),
                       trim(line.substr(eq + 1)));
  }
  return base;
}

std::string TrainConfig::to_key_values() const {
  std::ostringstream out;
  auto join = [](const auto& values) {
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) s += ',';
      s += std::to_string(values[i]);
    }
    return s.empty() ? std::string("none") : s;
  };
  out << "objective=" << to_string(objective) << '\n'
      << "num_exploration=" << num_exploration << '\n'
      << "depth_cutoff=" << mdp.depth_cutoff << '\n'
      << "allow_revisits=" << (mdp.allow_revisits ? "true" : "false") << '\n'
      << "batch_size=" << batch_size << '\n'
      << "accumulation_steps=" << accumulation_steps << '\n'
      << "lr=" << format_double(lr) << '\n'
      << "n_epochs=" << epochs << '\n'
      << "max_steps=" << max_steps << '\n'
      << "eval_ratio=" << format_double(eval_ratio) << '\n'
      << "eval_step=" << eval_step << '\n'
      << "target_loss=" << format_double(target_loss) << '\n'
      << "boundary_const=" << format_double(boundary_const) << '\n'
      << "learn_initial_flow=" << (learn_initial_flow ? "true" : "false")
      << '\n'
      << "learn_log_z=" << (learn_log_z ? "true" : "false") << '\n'
      << "log_reward_floor=" << format_double(log_reward_floor) << '\n'
      << "seed=" << seed << '\n'
      << "dim=" << encoder.dim << '\n'
      << "ngram_orders=" << join(encoder.ngram_orders) << '\n'
      << "doc_cutoff=" << encoder.doc_cutoff << '\n'
      << "window_size=" << encoder.window_size << '\n'
      << "hash_seed=" << encoder.hash_seed << '\n'
      << "hidden=" << join(hidden.layers) << '\n'
      << "activation=" << to_string(hidden.activation) << '\n'
      << "reward="
      << (reward.mode == RewardSpec::Mode::kBinary ? "binary" : "table")
      << '\n';
  for (const auto& [node, value] : reward.table) {
    out << "reward_table." << node << '=' << format_double(value) << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Data collection

namespace {

// Uniform draw among all shortest seed->target paths (by node sequence), or
// empty when the target is farther than `max_depth`.
std::vector<NodeIndex> sample_shortest_path(const Graph& graph, NodeIndex seed,
                                            NodeIndex target, int max_depth,
                                            Rng& rng) {
  if (seed == target) return {seed};
  const std::size_t n = graph.node_count();
  constexpr int kUnseen = -1;
  std::vector<int> dist(n, kUnseen);
  std::vector<double> count(n, 0.0);  // number of shortest paths from seed
  std::deque<NodeIndex> frontier{seed};
  dist[seed] = 0;
  count[seed] = 1.0;
  while (!frontier.empty()) {
    const NodeIndex u = frontier.front();
    frontier.pop_front();
    if (dist[u] >= max_depth) continue;
    if (dist[target] != kUnseen && dist[u] >= dist[target]) break;
    std::vector<NodeIndex> seen_here;  // parallel edges count once
    for (const Neighbor& nb : graph.neighbors(u)) {
      if (std::find(seen_here.begin(), seen_here.end(), nb.node) !=
          seen_here.end()) {
        continue;
      }
      seen_here.push_back(nb.node);
      if (dist[nb.node] == kUnseen) {
        dist[nb.node] = dist[u] + 1;
        frontier.push_back(nb.node);
      }
      if (dist[nb.node] == dist[u] + 1) count[nb.node] += count[u];
    }
  }
  if (dist[target] == kUnseen || dist[target] > max_depth) return {};

  // Walk back from the target choosing each predecessor with probability
  // proportional to its shortest-path count.
  std::vector<NodeIndex> reversed{target};
  NodeIndex v = target;
  while (v != seed) {
    std::vector<NodeIndex> preds;
    std::vector<double> weights;
    for (const Neighbor& nb : graph.neighbors(v)) {
      if (dist[nb.node] == dist[v] - 1 &&
          std::find(preds.begin(), preds.end(), nb.node) == preds.end()) {
        preds.push_back(nb.node);
        weights.push_back(count[nb.node]);
      }
    }
    double total = 0.0;
    for (double w : weights) total += w;
    for (double& w : weights) w /= total;
    v = preds[sample_categorical(weights, rng)];
    reversed.push_back(v);
  }
  return {reversed.rbegin(), reversed.rend()};
}

}  // namespace

Collection collect_trajectories(const Featurizer& featurizer,
                                const QuerySet& queries,
                                const RewardSpec& reward, std::uint64_t seed) {
  const Graph& graph = featurizer.graph();
  const MdpConfig& mdp = featurizer.mdp();
  Collection out;
  Rng rng(seed);
  for (const Query& q : queries.queries) {
    const NodeIndex start = featurizer.document_index().rank(q.text, 1)[0].node;
    const QueryRef ref{q.qid, q.text};
    for (NodeIndex target : q.targets) {
      ++out.coverage.requested;
      auto path =
          sample_shortest_path(graph, start, target, mdp.depth_cutoff, rng);
      if (path.empty()) {
        ++out.coverage.unreachable;
        continue;
      }
      CollectedTrajectory ct;
      ct.id = out.trajectories.size();
      ct.query = &q;
      ct.target = target;
      ct.trajectory = trajectory_from_path(graph, ref, path, mdp);
      ct.trajectory.reward =
          trajectory_reward(ct.trajectory, q.targets, reward);
      if (!(ct.trajectory.reward > 0.0)) {
        ++out.coverage.zero_reward;
        continue;
      }
      ++out.coverage.collected;
      out.trajectories.push_back(std::move(ct));
    }
  }
  return out;
}

std::vector<TransitionBatch> expand_local_exploration(
    const Graph& graph, const CollectedTrajectory& traj,
    const RewardSpec& reward, std::size_t k, const MdpConfig& mdp,
    std::uint64_t seed) {
  Rng rng(hash_combine(seed, traj.id));
  const std::vector<NodeIndex>& targets = traj.query->targets;
  std::vector<TransitionBatch> out;
  for (const Step& step : traj.trajectory.steps) {
    TransitionBatch batch;
    batch.qid = traj.trajectory.query.qid;
    batch.trajectory_id = traj.id;
    batch.anchor = step.state;
    batch.anchor_is_initial = step.state.depth() == 0;

    auto make = [&](const Action& a, bool gt) {
      TransitionCandidate c;
      c.action = a;
      c.next = apply_action(graph, step.state, a, mdp);
      c.terminal = a.is_stop();
      c.reward =
          c.terminal ? reward.terminal_reward(step.state.current(), targets)
                     : 0.0;
      c.ground_truth = gt;
      return c;
    };
    batch.candidates.push_back(make(step.action(), true));

    std::vector<std::size_t> others;
    for (std::size_t i = 0; i < step.candidates.size(); ++i) {
      if (i != step.chosen) others.push_back(i);
    }
    // Partial Fisher-Yates: the first min(k, |others|) slots are a uniform
    // sample without replacement.
    const std::size_t take = std::min(k, others.size());
    for (std::size_t i = 0; i < take; ++i) {
      const std::size_t j = i + uniform_index(rng, others.size() - i);
      std::swap(others[i], others[j]);
      batch.candidates.push_back(make(step.candidates[others[i]], false));
    }
    out.push_back(std::move(batch));
  }
  return out;
}

std::vector<PreferencePair> make_preference_pairs(
    const std::vector<TransitionBatch>& batches) {
  std::vector<PreferencePair> out;
  for (const TransitionBatch& b : batches) {
    for (std::size_t i = 1; i < b.candidates.size(); ++i) {
      out.push_back({b.anchor, b.candidates[0].action, b.candidates[i].action});
    }
  }
  return out;
}

FeaturizedBatch featurize_batch(const Featurizer& featurizer,
                                const TransitionBatch& batch,
                                double log_reward_floor) {
  FeaturizedBatch out;
  out.anchor = featurizer.state_features(batch.anchor);
  out.anchor_is_initial = batch.anchor_is_initial;
  std::vector<Action> actions;
  for (const auto& c : batch.candidates) actions.push_back(c.action);
  auto action_feats = featurizer.action_features(batch.anchor, actions);
  for (std::size_t i = 0; i < batch.candidates.size(); ++i) {
    const TransitionCandidate& c = batch.candidates[i];
    CandidateFeatures f;
    f.action = std::move(action_feats[i]);
    f.terminal = c.terminal;
    if (c.terminal) {
      f.terminal_log_reward =
          c.reward > 0.0 ? std::log(c.reward) : log_reward_floor;
    } else {
      f.next_state = featurizer.state_features(c.next);
    }
    out.candidates.push_back(std::move(f));
  }
  return out;
}

FeaturizedTrajectory featurize_trajectory(const Featurizer& featurizer,
                                          const Trajectory& traj) {
  FeaturizedTrajectory out;
  out.reward = traj.reward;
  for (const Step& step : traj.steps) {
    FeaturizedStep f;
    f.state = featurizer.state_features(step.state);
    f.candidates = featurizer.action_features(step.state, step.candidates);
    f.chosen = step.chosen;
    out.steps.push_back(std::move(f));
  }
  return out;
}

FeaturizedPair featurize_pair(const Featurizer& featurizer,
                              const PreferencePair& pair) {
  const Action actions[] = {pair.positive, pair.negative};
  auto feats = featurizer.action_features(pair.state, actions);
  return {std::move(feats[0]), std::move(feats[1])};
}

// ---------------------------------------------------------------------------
// Training loop

std::string TrainingLog::to_csv() const {
  std::string out =
      "step,transition_loss,start_loss,end_loss,total_loss,eval_loss,"
      "eval_policy_acc\n";
  auto cell = [](double v) {
    return std::isnan(v) ? std::string() : format_double(v);
  };
  for (const LogRow& r : rows) {
    out += std::to_string(r.step) + ',' + cell(r.transition_loss) + ',' +
           cell(r.start_loss) + ',' + cell(r.end_loss) + ',' +
           cell(r.total_loss) + ',' + cell(r.eval_loss) + ',' +
           cell(r.eval_policy_acc) + '\n';
  }
  return out;
}

namespace {

std::string digest_hex(std::string_view text) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(text)));
  return buf;
}

}  // namespace

struct TrainingData::Impl {
  Impl(const Graph& graph, const TrainConfig& config)
      : cfg(config),
        encoder(config.encoder),
        featurizer(graph, encoder, config.mdp),
        boundary(config.boundary()) {}

  FeaturizedBatch batch(std::size_t i) const {
    return featurize_batch(featurizer, batches[i], cfg.log_reward_floor);
  }
  FeaturizedTrajectory trajectory(std::size_t i) const {
    return featurize_trajectory(featurizer,
                                collection.trajectories[i].trajectory);
  }

  ObjectiveResult evaluate(const Model& model, const Unit& unit) const {
    switch (cfg.objective) {
      case Objective::kDble:
        return dble_loss(model, batch(unit.index), boundary);
      case Objective::kSft:
        return sft_loss(model, batch(unit.index));
      case Objective::kPrm:
        return prm_loss(model, featurize_pair(featurizer, pairs[unit.index]));
      case Objective::kTb:
        return tb_loss(model, trajectory(unit.index));
      case Objective::kSubtb:
        return subtb_all_spans(model, trajectory(unit.index));
    }
    throw Error(ErrorKind::kInvalidArgument, "unknown objective");
  }

  // Sum over every span of at most window_size transitions.
  ObjectiveResult subtb_all_spans(const Model& model,
                                  const FeaturizedTrajectory& traj) const {
    ObjectiveResult total;
    total.grads.assign(model.size(), 0.0);
    const std::size_t T = traj.steps.size();
    const std::size_t window = cfg.encoder.window_size;
    for (std::size_t i = 0; i < T; ++i) {
      for (std::size_t j = i + 1; j <= std::min(T, i + window); ++j) {
        ObjectiveResult r = subtb_loss(model, traj, i, j, boundary);
        total.loss += r.loss;
        total.transition += r.transition;
        total.start += r.start;
        total.end += r.end;
        for (std::size_t p = 0; p < r.grads.size(); ++p) {
          total.grads[p] += r.grads[p];
        }
      }
    }
    return total;
  }

  TrainConfig cfg;
  HashingEncoder encoder;
  Featurizer featurizer;
  BoundaryConfig boundary;
  Collection collection;
  std::vector<TransitionBatch> batches;
  std::vector<PreferencePair> pairs;
  std::vector<Unit> train_units;
  std::vector<Unit> eval_units;
  std::vector<std::size_t> eval_batches;
};

TrainingData::TrainingData(const Graph& graph, const QuerySet& queries,
                           const TrainConfig& cfg)
    : impl_(std::make_unique<Impl>(graph, cfg)) {
  cfg.validate();
  Impl& d = *impl_;
  d.collection = collect_trajectories(d.featurizer, queries, cfg.reward,
                                      hash_combine(cfg.seed, 1));
  if (d.collection.trajectories.empty()) {
    throw Error(ErrorKind::kInvalidArgument,
                "no trajectories with positive reward could be collected");
  }
  for (const CollectedTrajectory& t : d.collection.trajectories) {
    auto expanded =
        expand_local_exploration(graph, t, cfg.reward, cfg.num_exploration,
                                 cfg.mdp, hash_combine(cfg.seed, 2));
    d.batches.insert(d.batches.end(),
                     std::make_move_iterator(expanded.begin()),
                     std::make_move_iterator(expanded.end()));
  }
  d.pairs = make_preference_pairs(d.batches);

  // Query-level split: every unit of a query lands on the same side.
  std::vector<std::string> qids;
  for (const Query& q : queries.queries) qids.push_back(q.qid);
  std::sort(qids.begin(), qids.end(),
            [&](const std::string& a, const std::string& b) {
              const auto ha = hash_string(cfg.seed, a);
              const auto hb = hash_string(cfg.seed, b);
              return ha != hb ? ha < hb : a < b;
            });
  const auto n_train = static_cast<std::size_t>(
      std::ceil(cfg.eval_ratio * static_cast<double>(qids.size())));
  std::map<std::string, bool> is_train;
  for (std::size_t i = 0; i < qids.size(); ++i) is_train[qids[i]] = i < n_train;

  auto place = [&](const std::string& qid, std::size_t index) {
    (is_train.at(qid) ? d.train_units : d.eval_units).push_back({qid, index});
  };
  switch (cfg.objective) {
    case Objective::kDble:
    case Objective::kSft:
      for (std::size_t i = 0; i < d.batches.size(); ++i) {
        place(d.batches[i].qid, i);
      }
      break;
    case Objective::kPrm:
      for (std::size_t i = 0; i < d.pairs.size(); ++i) {
        place(d.pairs[i].state.query.qid, i);
      }
      break;
    case Objective::kTb:
    case Objective::kSubtb:
      for (std::size_t i = 0; i < d.collection.trajectories.size(); ++i) {
        place(d.collection.trajectories[i].trajectory.query.qid, i);
      }
      break;
  }
  for (std::size_t i = 0; i < d.batches.size(); ++i) {
    if (!is_train.at(d.batches[i].qid)) d.eval_batches.push_back(i);
  }
}

TrainingData::~TrainingData() = default;

const TrainConfig& TrainingData::config() const { return impl_->cfg; }
const Featurizer& TrainingData::featurizer() const { return impl_->featurizer; }
const Collection& TrainingData::collection() const {
  return impl_->collection;
}
const std::vector<TransitionBatch>& TrainingData::batches() const {
  return impl_->batches;
}
const std::vector<Unit>& TrainingData::train_units() const {
  return impl_->train_units;
}
const std::vector<Unit>& TrainingData::eval_units() const {
  return impl_->eval_units;
}

ObjectiveResult TrainingData::unit_loss(const Model& model,
                                        const Unit& unit) const {
  return impl_->evaluate(model, unit);
}

SetLoss TrainingData::mean_loss(const Model& model,
                                const std::vector<Unit>& units) const {
  if (units.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan, nan, nan};
  }
  SetLoss out;
  for (const Unit& u : units) {
    const ObjectiveResult r = impl_->evaluate(model, u);
    out.transition += r.transition;
    out.start += r.start;
    out.end += r.end;
    out.total += r.loss;
  }
  const double n = static_cast<double>(units.size());
  out.transition /= n;
  out.start /= n;
  out.end /= n;
  out.total /= n;
  return out;
}

LossAndGrad TrainingData::total_loss(const Model& model) const {
  LossAndGrad out;
  out.grads.assign(model.size(), 0.0);
  for (const Unit& u : impl_->train_units) {
    const ObjectiveResult r = impl_->evaluate(model, u);
    out.loss += r.loss;
    for (std::size_t p = 0; p < r.grads.size(); ++p) out.grads[p] += r.grads[p];
  }
  return out;
}

double TrainingData::eval_policy_accuracy(const Model& model) const {
  const auto& which = impl_->eval_batches;
  if (which.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t correct = 0;
  for (std::size_t i : which) {
    const TransitionBatch& b = impl_->batches[i];
    std::vector<Action> actions;
    for (const auto& c : b.candidates) actions.push_back(c.action);
    const auto scores = action_scores(
        model, impl_->featurizer.action_features(b.anchor, actions));
    const auto best = std::max_element(scores.begin(), scores.end());
    if (best == scores.begin()) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(which.size());
}

TrainResult train(const Graph& graph, const QuerySet& queries,
                  const TrainConfig& cfg) {
  const TrainingData data(graph, queries, cfg);

  TrainResult result;
  result.model = init_model(cfg.encoder, cfg.mdp, cfg.hidden, cfg.seed);
  result.model.train_digest = digest_hex(cfg.to_key_values());
  if (!cfg.learn_log_z) result.model.set_log_z(cfg.boundary_const);
  result.coverage = data.collection().coverage;
  result.train_units = data.train_units().size();
  result.eval_units = data.eval_units().size();

  Model& model = result.model;
  OptState opt = OptState::for_model(model, cfg.lr, cfg.accumulation_steps);
  GradAccumulator accumulator(model.size());
  const std::size_t units_per_step = cfg.batch_size * cfg.accumulation_steps;

  auto log_row = [&](std::size_t step) {
    const SetLoss tr = data.mean_loss(model, data.train_units());
    const SetLoss ev = data.mean_loss(model, data.eval_units());
    LogRow row{step,     tr.transition, tr.start, tr.end, tr.total, ev.total,
               data.eval_policy_accuracy(model)};
    result.log.rows.push_back(row);
    return row;
  };

  auto fail = [&](const Unit& unit, const Error& e) {
    if (!cfg.dump_path.empty()) save_checkpoint(model, cfg.dump_path);
    throw Error(ErrorKind::kNumerical,
                std::string(e.what()) + " at step " +
                    std::to_string(result.steps) + ", query " + unit.qid +
                    ", unit " + std::to_string(unit.index) +
                    (cfg.dump_path.empty() ? ""
                                           : "; model dumped to " +
                                                 cfg.dump_path));
  };

  auto apply_update = [&]() {
    std::vector<double> grads = accumulator.mean();
    accumulator.reset();
    if (!cfg.learn_log_z) grads[model.log_z_index()] = 0.0;
    adam_step(model, grads, opt);
    ++result.steps;
  };

  bool done = data.train_units().empty() || cfg.epochs == 0;
  std::vector<Unit> order = data.train_units();
  for (std::size_t epoch = 0; epoch < cfg.epochs && !done; ++epoch) {
    Rng rng(hash_combine(hash_combine(cfg.seed, 3), epoch));
    shuffle(order, rng);
    for (std::size_t u = 0; u < order.size() && !done; ++u) {
      try {
        accumulator.add(data.unit_loss(model, order[u]).grads);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kNumerical) throw;
        fail(order[u], e);
      }
      const bool epoch_end = u + 1 == order.size();
      if (accumulator.count() < units_per_step && !epoch_end) continue;
      try {
        apply_update();
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kNumerical) throw;
        fail(order[u], e);
      }
      const bool at_limit = cfg.max_steps > 0 && result.steps >= cfg.max_steps;
      if (result.steps % cfg.eval_step == 0 || at_limit) {
        const LogRow row = log_row(result.steps);
        if (cfg.target_loss > 0.0 && row.total_loss <= cfg.target_loss) {
          result.converged = true;
          done = true;
        }
      }
      if (at_limit) done = true;
    }
  }
  if (result.log.rows.empty() || result.log.rows.back().step != result.steps) {
    const LogRow row = log_row(result.steps);
    if (cfg.target_loss > 0.0 && row.total_loss <= cfg.target_loss) {
      result.converged = true;
    }
  }
  return result;
}

}  // namespace graphflow
