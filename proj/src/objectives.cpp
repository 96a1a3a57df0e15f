#include "graphflow/objectives.hpp"

#include <cmath>

#include "graphflow/error.hpp"

namespace graphflow {

namespace {

// Scores every candidate and keeps the tapes for the backward pass.
struct ScoredCandidates {
  std::vector<double> scores;
  std::vector<Tape> tapes;
  std::vector<double> probs;
  double lse = 0.0;
};

template <typename GetFeatures>
ScoredCandidates score_all(const Model& model, std::size_t n,
                           GetFeatures&& features) {
  ScoredCandidates out;
  out.scores.resize(n);
  out.tapes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.scores[i] =
        head_forward(model, Head::kPolicy, features(i), &out.tapes[i]);
  }
  out.lse = log_sum_exp(out.scores);
  out.probs.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.probs[i] = std::exp(out.scores[i] - out.lse);
  }
  return out;
}

void check_finite(double loss, const char* name) {
  if (!std::isfinite(loss)) {
    throw Error(ErrorKind::kNumerical,
                std::string("non-finite ") + name + " loss");
  }
}

}  // namespace

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

ObjectiveResult dble_loss(const Model& model, const FeaturizedBatch& batch,
                          const BoundaryConfig& boundary) {
  const std::size_t n = batch.candidates.size();
  if (n == 0) {
    throw Error(ErrorKind::kInvalidArgument, "dble_loss: empty candidate list");
  }
  ObjectiveResult result;
  result.grads.assign(model.size(), 0.0);

  const bool anchor_fixed =
      batch.anchor_is_initial && !boundary.learn_initial_flow;
  Tape anchor_tape;
  const double anchor_flow =
      anchor_fixed ? boundary.initial_const
                   : head_forward(model, Head::kFlow, batch.anchor,
                                  &anchor_tape);

  auto scored = score_all(model, n, [&](std::size_t i) -> const FeatureVector& {
    return batch.candidates[i].action;
  });

  std::vector<Tape> next_tapes(n);
  std::vector<double> residual(n);
  for (std::size_t i = 0; i < n; ++i) {
    const CandidateFeatures& c = batch.candidates[i];
    const double next_flow =
        c.terminal ? boundary.terminal_const + c.terminal_log_reward
                   : head_forward(model, Head::kFlow, c.next_state,
                                  &next_tapes[i]);
    residual[i] = anchor_flow - next_flow + scored.scores[i] - scored.lse;
    const double term = residual[i] * residual[i];
    result.loss += term;
    if (batch.anchor_is_initial) {
      result.start += term;
    } else if (c.terminal) {
      result.end += term;
    } else {
      result.transition += term;
    }
  }
  check_finite(result.loss, "dble");

  double total = 0.0;
  for (double r : residual) total += 2.0 * r;
  if (!anchor_fixed) {
    head_backward(model, Head::kFlow, anchor_tape, total, result.grads);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double d_score = 2.0 * residual[i] - scored.probs[i] * total;
    head_backward(model, Head::kPolicy, scored.tapes[i], d_score,
                  result.grads);
    if (!batch.candidates[i].terminal) {
      head_backward(model, Head::kFlow, next_tapes[i], -2.0 * residual[i],
                    result.grads);
    }
  }
  return result;
}

namespace {

// Sum over steps [from, to) of log P(a_t | s_t). The scored candidates are
// kept for path_log_prob_backward.
double path_log_prob(const Model& model, const FeaturizedTrajectory& traj,
                     std::size_t from, std::size_t to,
                     std::vector<ScoredCandidates>* keep) {
  double total = 0.0;
  for (std::size_t t = from; t < to; ++t) {
    const FeaturizedStep& step = traj.steps[t];
    if (step.candidates.empty() || step.chosen >= step.candidates.size()) {
      throw Error(ErrorKind::kInvalidArgument, "malformed trajectory step");
    }
    auto scored = score_all(model, step.candidates.size(),
                            [&](std::size_t i) -> const FeatureVector& {
                              return step.candidates[i];
                            });
    total += scored.scores[step.chosen] - scored.lse;
    if (keep) keep->push_back(std::move(scored));
  }
  return total;
}

void path_log_prob_backward(const Model& model,
                            const FeaturizedTrajectory& traj,
                            std::size_t from,
                            const std::vector<ScoredCandidates>& kept,
                            double upstream, std::vector<double>& grads) {
  for (std::size_t k = 0; k < kept.size(); ++k) {
    const FeaturizedStep& step = traj.steps[from + k];
    const ScoredCandidates& s = kept[k];
    for (std::size_t i = 0; i < s.scores.size(); ++i) {
      const double indicator = i == step.chosen ? 1.0 : 0.0;
      head_backward(model, Head::kPolicy, s.tapes[i],
                    upstream * (indicator - s.probs[i]), grads);
    }
  }
}

}  // namespace

ObjectiveResult tb_loss(const Model& model, const FeaturizedTrajectory& traj) {
  if (traj.steps.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "tb_loss: empty trajectory");
  }
  if (!(traj.reward > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument,
                "tb_loss: reward must be positive");
  }
  ObjectiveResult result;
  result.grads.assign(model.size(), 0.0);
  std::vector<ScoredCandidates> kept;
  const double log_pf =
      path_log_prob(model, traj, 0, traj.steps.size(), &kept);
  const double residual = model.log_z() + log_pf - std::log(traj.reward);
  result.loss = residual * residual;
  result.transition = result.loss;
  check_finite(result.loss, "tb");
  result.grads[model.log_z_index()] += 2.0 * residual;
  path_log_prob_backward(model, traj, 0, kept, 2.0 * residual, result.grads);
  return result;
}

ObjectiveResult subtb_loss(const Model& model,
                           const FeaturizedTrajectory& traj, std::size_t i,
                           std::size_t j, const BoundaryConfig& boundary) {
  const std::size_t T = traj.steps.size();
  if (i >= j || j > T) {
    throw Error(ErrorKind::kInvalidArgument,
                "subtb_loss: need 0 <= i < j <= T");
  }
  if (j == T && !(traj.reward > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument,
                "subtb_loss: terminal reward must be positive");
  }
  ObjectiveResult result;
  result.grads.assign(model.size(), 0.0);

  const bool start_fixed = i == 0 && !boundary.learn_initial_flow;
  Tape start_tape;
  const double start_flow =
      start_fixed ? boundary.initial_const
                  : head_forward(model, Head::kFlow, traj.steps[i].state,
                                 &start_tape);
  Tape end_tape;
  const bool end_terminal = j == T;
  const double end_flow =
      end_terminal
          ? boundary.terminal_const + std::log(traj.reward)
          : head_forward(model, Head::kFlow, traj.steps[j].state, &end_tape);

  std::vector<ScoredCandidates> kept;
  const double log_pf = path_log_prob(model, traj, i, j, &kept);
  const double residual = start_flow + log_pf - end_flow;
  result.loss = residual * residual;
  check_finite(result.loss, "subtb");
  if (i == 0) {
    result.start = result.loss;
  } else if (end_terminal) {
    result.end = result.loss;
  } else {
    result.transition = result.loss;
  }

  const double up = 2.0 * residual;
  if (!start_fixed) {
    head_backward(model, Head::kFlow, start_tape, up, result.grads);
  }
  if (!end_terminal) {
    head_backward(model, Head::kFlow, end_tape, -up, result.grads);
  }
  path_log_prob_backward(model, traj, i, kept, up, result.grads);
  return result;
}

ObjectiveResult sft_loss(const Model& model, const FeaturizedBatch& batch) {
  const std::size_t n = batch.candidates.size();
  if (n == 0) {
    throw Error(ErrorKind::kInvalidArgument, "sft_loss: empty batch");
  }
  ObjectiveResult result;
  result.grads.assign(model.size(), 0.0);
  auto scored = score_all(model, n, [&](std::size_t i) -> const FeatureVector& {
    return batch.candidates[i].action;
  });
  result.loss = scored.lse - scored.scores[0];
  result.transition = result.loss;
  check_finite(result.loss, "sft");
  for (std::size_t i = 0; i < n; ++i) {
    const double d = scored.probs[i] - (i == 0 ? 1.0 : 0.0);
    head_backward(model, Head::kPolicy, scored.tapes[i], d, result.grads);
  }
  return result;
}

ObjectiveResult prm_loss(const Model& model, const FeaturizedPair& pair) {
  ObjectiveResult result;
  result.grads.assign(model.size(), 0.0);
  Tape pos_tape, neg_tape;
  const double pos = head_forward(model, Head::kPolicy, pair.positive, &pos_tape);
  const double neg = head_forward(model, Head::kPolicy, pair.negative, &neg_tape);
  const double margin = pos - neg;
  result.loss = softplus(-margin);
  result.transition = result.loss;
  check_finite(result.loss, "prm");
  // d softplus(-m)/dm = -sigmoid(-m)
  const double sig = 1.0 / (1.0 + std::exp(margin));
  head_backward(model, Head::kPolicy, pos_tape, -sig, result.grads);
  head_backward(model, Head::kPolicy, neg_tape, sig, result.grads);
  return result;
}

}  // namespace graphflow
