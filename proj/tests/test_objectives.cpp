#include <doctest.h>

#include <cmath>

#include "graphflow/error.hpp"
#include "graphflow/objectives.hpp"
#include "helpers.hpp"

using namespace graphflow;
using namespace testing_support;

namespace {

// Linear heads on one-hot inputs: feature k picks weight k, so flows and
// scores can be set by hand.
struct HandModel {
  Model model = tiny_model(1, {});

  HandModel() {
    for (double& p : model.params()) p = 0.0;
  }
  void set_flow(std::size_t k, double v) {
    model.params()[model.layers(Head::kFlow)[0].weight_offset + k] = v;
  }
  void set_score(std::size_t k, double v) {
    model.params()[model.layers(Head::kPolicy)[0].weight_offset + k] = v;
  }
  FeatureVector state(std::size_t k) const {
    FeatureVector v(model.state_size(), 0.0);
    v[k] = 1.0;
    return v;
  }
  FeatureVector action(std::size_t k) const {
    FeatureVector v(model.action_size(), 0.0);
    v[k] = 1.0;
    return v;
  }
};

LossAndGrad as_loss(const ObjectiveResult& r) { return {r.loss, r.grads}; }

}  // namespace

TEST_CASE("dble: singleton candidate at the boundary is zero") {
  HandModel h;
  FeaturizedBatch b;
  b.anchor = h.state(0);
  b.anchor_is_initial = true;
  b.candidates.push_back({h.action(0), {}, true, 0.0});
  BoundaryConfig pinned;
  pinned.learn_initial_flow = false;
  CHECK(dble_loss(h.model, b, pinned).loss == 0.0);
}

TEST_CASE("dble: two equal candidates with zero flows") {
  HandModel h;
  FeaturizedBatch b;
  b.anchor = h.state(0);
  b.candidates.push_back({h.action(0), h.state(1), false, 0.0});
  b.candidates.push_back({h.action(1), h.state(2), false, 0.0});
  const ObjectiveResult r = dble_loss(h.model, b, BoundaryConfig{});
  CHECK(r.loss == doctest::Approx(2.0 * std::log(2.0) * std::log(2.0)).epsilon(1e-14));
  CHECK(r.transition == r.loss);
}

TEST_CASE("dble: three candidates against a straight-line recomputation") {
  HandModel h;
  const double scores[3] = {0.5, -0.2, 0.1};
  const double flow_anchor = 0.3;
  const double flow_next[3] = {0.1, 0.0, -0.4};
  h.set_flow(0, flow_anchor);
  FeaturizedBatch b;
  b.anchor = h.state(0);
  for (int i = 0; i < 3; ++i) {
    h.set_score(i, scores[i]);
    h.set_flow(i + 1, flow_next[i]);
    b.candidates.push_back({h.action(i), h.state(i + 1), false, 0.0});
  }
  const double lse = std::log(std::exp(0.5) + std::exp(-0.2) + std::exp(0.1));
  double expect = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double r = flow_anchor - flow_next[i] + scores[i] - lse;
    expect += r * r;
  }
  const ObjectiveResult r = dble_loss(h.model, b, BoundaryConfig{});
  CHECK(std::abs(r.loss - expect) <= 1e-12);

  // Terminal candidate: its flow is c_b + log R, never the flow head.
  b.candidates[2].terminal = true;
  b.candidates[2].terminal_log_reward = std::log(2.0);
  BoundaryConfig cb;
  cb.terminal_const = 0.25;
  double expect_t = 0.0;
  const double next_t[3] = {0.1, 0.0, 0.25 + std::log(2.0)};
  for (int i = 0; i < 3; ++i) {
    const double res = flow_anchor - next_t[i] + scores[i] - lse;
    expect_t += res * res;
  }
  const ObjectiveResult rt = dble_loss(h.model, b, cb);
  CHECK(std::abs(rt.loss - expect_t) <= 1e-12);
  CHECK(rt.end + rt.transition == doctest::Approx(rt.loss));

  // Initial anchor pinned to c_b.
  b.anchor_is_initial = true;
  BoundaryConfig pinned;
  pinned.learn_initial_flow = false;
  pinned.initial_const = -0.5;
  double expect_i = 0.0;
  const double next_i[3] = {0.1, 0.0, std::log(2.0)};
  for (int i = 0; i < 3; ++i) {
    const double res = -0.5 - next_i[i] + scores[i] - lse;
    expect_i += res * res;
  }
  const ObjectiveResult ri = dble_loss(h.model, b, pinned);
  CHECK(std::abs(ri.loss - expect_i) <= 1e-12);
  CHECK(ri.start == ri.loss);
}

TEST_CASE("dble is zero exactly at detailed balance") {
  // log P(i) = logF(s'_i) - logF(s): choose flows that satisfy it.
  HandModel h;
  const double scores[3] = {0.7, -1.1, 0.2};
  const double lse = std::log(std::exp(0.7) + std::exp(-1.1) + std::exp(0.2));
  h.set_flow(0, 1.3);
  FeaturizedBatch b;
  b.anchor = h.state(0);
  for (int i = 0; i < 3; ++i) {
    h.set_score(i, scores[i]);
    h.set_flow(i + 1, 1.3 + scores[i] - lse);
    b.candidates.push_back({h.action(i), h.state(i + 1), false, 0.0});
  }
  CHECK(dble_loss(h.model, b, BoundaryConfig{}).loss <= 1e-28);
  h.set_flow(2, 1.3 + scores[1] - lse + 0.01);
  CHECK(dble_loss(h.model, b, BoundaryConfig{}).loss > 0.0);
  CHECK_THROWS_AS(dble_loss(h.model, FeaturizedBatch{h.state(0), false, {}}, BoundaryConfig{}),
                  Error);
}

TEST_CASE("tb_loss") {
  HandModel h;
  // Deterministic single step: one candidate, R = 1, log Z = 0.
  FeaturizedTrajectory one;
  one.reward = 1.0;
  one.steps.push_back({h.state(0), {h.action(0)}, 0});
  CHECK(tb_loss(h.model, one).loss == 0.0);

  FeaturizedTrajectory two = one;
  two.steps[0].candidates.push_back(h.action(1));
  CHECK(tb_loss(h.model, two).loss ==
        doctest::Approx(std::log(2.0) * std::log(2.0)).epsilon(1e-14));

  // Three steps with hand-set scores.
  h.set_score(0, 0.4);
  h.set_score(1, -0.3);
  h.set_score(2, 1.0);
  h.set_score(3, 0.2);
  h.model.set_log_z(0.7);
  FeaturizedTrajectory three;
  three.reward = 2.5;
  three.steps.push_back({h.state(0), {h.action(0), h.action(1)}, 1});
  three.steps.push_back({h.state(1), {h.action(2), h.action(3), h.action(0)}, 0});
  three.steps.push_back({h.state(2), {h.action(3)}, 0});
  const double lp1 = -0.3 - std::log(std::exp(0.4) + std::exp(-0.3));
  const double lp2 = 1.0 - std::log(std::exp(1.0) + std::exp(0.2) + std::exp(0.4));
  const double res = 0.7 + lp1 + lp2 + 0.0 - std::log(2.5);
  CHECK(std::abs(tb_loss(h.model, three).loss - res * res) <= 1e-12);

  three.reward = 0.0;
  CHECK_THROWS_AS(tb_loss(h.model, three), Error);
}

TEST_CASE("subtb_loss") {
  HandModel h;
  FeaturizedTrajectory det;
  det.reward = 1.0;
  det.steps.push_back({h.state(0), {h.action(0)}, 0});
  det.steps.push_back({h.state(1), {h.action(1)}, 0});
  // Deterministic step between two flow-head states that agree.
  CHECK(subtb_loss(h.model, det, 0, 1, BoundaryConfig{}).loss == 0.0);
  CHECK_THROWS_AS(subtb_loss(h.model, det, 1, 1, BoundaryConfig{}), Error);
  CHECK_THROWS_AS(subtb_loss(h.model, det, 0, 3, BoundaryConfig{}), Error);

  // Full span with a pinned zero initial flow equals TB at log Z = 0.
  const Model m = tiny_model(8);
  const FeaturizedTrajectory t = random_trajectory(m, {3, 2, 4}, {2, 0, 0}, 1.0, 9);
  BoundaryConfig pinned;
  pinned.learn_initial_flow = false;
  Model z0 = m;
  z0.set_log_z(0.0);
  CHECK(std::abs(subtb_loss(m, t, 0, 3, pinned).loss - tb_loss(z0, t).loss) <= 1e-12);

  // Mid span 1..2 against a recomputation.
  h.set_flow(1, 0.6);
  h.set_flow(2, -0.2);
  h.set_score(0, 0.3);
  h.set_score(1, -0.4);
  FeaturizedTrajectory mid;
  mid.reward = 1.0;
  mid.steps.push_back({h.state(0), {h.action(0)}, 0});
  mid.steps.push_back({h.state(1), {h.action(0), h.action(1)}, 1});
  mid.steps.push_back({h.state(2), {h.action(2)}, 0});
  const double lp = -0.4 - std::log(std::exp(0.3) + std::exp(-0.4));
  const double res = 0.6 + lp - (-0.2);
  CHECK(std::abs(subtb_loss(h.model, mid, 1, 2, BoundaryConfig{}).loss - res * res) <= 1e-12);
}

TEST_CASE("sft_loss") {
  HandModel h;
  FeaturizedBatch b;
  b.anchor = h.state(0);
  b.candidates.push_back({h.action(0), h.state(1), false, 0.0});
  CHECK(sft_loss(h.model, b).loss == 0.0);
  b.candidates.push_back({h.action(1), h.state(2), false, 0.0});
  CHECK(sft_loss(h.model, b).loss == doctest::Approx(std::log(2.0)).epsilon(1e-14));

  const double s[4] = {0.2, 1.5, -0.7, 0.0};
  b.candidates.push_back({h.action(2), {}, true, 0.0});
  b.candidates.push_back({h.action(3), {}, true, 0.0});
  for (int i = 0; i < 4; ++i) h.set_score(i, s[i]);
  const double expect =
      std::log(std::exp(0.2) + std::exp(1.5) + std::exp(-0.7) + std::exp(0.0)) - 0.2;
  CHECK(std::abs(sft_loss(h.model, b).loss - expect) <= 1e-12);

  // Uniform score shift: a bias on the linear head moves every score.
  Model shifted = h.model;
  shifted.params()[shifted.layers(Head::kPolicy)[0].bias_offset] = 3.0;
  CHECK(sft_loss(shifted, b).loss == doctest::Approx(expect).epsilon(1e-13));
  CHECK_THROWS_AS(sft_loss(h.model, FeaturizedBatch{}), Error);
}

TEST_CASE("prm_loss") {
  HandModel h;
  FeaturizedPair pair{h.action(0), h.action(1)};
  CHECK(prm_loss(h.model, pair).loss == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  h.set_score(0, 1.0);
  CHECK(prm_loss(h.model, pair).loss == doctest::Approx(std::log1p(std::exp(-1.0))).epsilon(1e-14));
  CHECK(prm_loss(h.model, pair).loss == doctest::Approx(0.3133).epsilon(1e-4));

  double last = INFINITY;
  for (double margin = -20.0; margin <= 20.0; margin += 0.5) {
    h.set_score(0, margin);
    const double l = prm_loss(h.model, pair).loss;
    CHECK(l < last);
    CHECK(l >= 0.0);
    last = l;
  }
  CHECK(softplus(800.0) == 800.0);
  CHECK(softplus(-800.0) >= 0.0);
}

TEST_CASE("every objective passes the gradient check") {
  const Model m = tiny_model(31);
  const BoundaryConfig boundary;
  const FeaturizedBatch b = random_batch(m, 5, {true, false, false, true}, 4);
  const FeaturizedBatch init = random_batch(m, 3, {false, true}, 6, true);
  FeaturizedTrajectory t = random_trajectory(m, {3, 4, 2}, {1, 3, 0}, 2.0, 7);
  Model mz = m;
  mz.set_log_z(0.4);
  std::mt19937_64 rng(1);
  const FeaturizedPair pair{random_features(m.action_size(), rng),
                            random_features(m.action_size(), rng)};

  const std::vector<std::pair<const char*, LossFn>> fns = {
      {"dble", [&](const Model& x) { return as_loss(dble_loss(x, b, boundary)); }},
      {"dble-initial", [&](const Model& x) { return as_loss(dble_loss(x, init, boundary)); }},
      {"tb", [&](const Model& x) { return as_loss(tb_loss(x, t)); }},
      {"subtb", [&](const Model& x) { return as_loss(subtb_loss(x, t, 0, 2, boundary)); }},
      {"subtb-end", [&](const Model& x) { return as_loss(subtb_loss(x, t, 1, 3, boundary)); }},
      {"sft", [&](const Model& x) { return as_loss(sft_loss(x, b)); }},
      {"prm", [&](const Model& x) { return as_loss(prm_loss(x, pair)); }},
  };
  for (const auto& [name, fn] : fns) {
    CAPTURE(name);
    const GradCheckReport r = grad_check(mz, fn, 1e-5);
    CHECK(r.max_rel_error <= 1e-4);
  }
}

TEST_CASE("losses are non-negative") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Model m = tiny_model(seed);
    const FeaturizedBatch b = random_batch(m, 4, {false, true}, seed + 100);
    CHECK(dble_loss(m, b, BoundaryConfig{}).loss >= 0.0);
    CHECK(sft_loss(m, b).loss >= 0.0);
  }
}
