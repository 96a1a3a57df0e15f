#include <doctest.h>

#include <cmath>
#include <cstring>

#include "graphflow/error.hpp"
#include "graphflow/flow_model.hpp"
#include "graphflow/objectives.hpp"
#include "helpers.hpp"

using namespace graphflow;
using namespace testing_support;

TEST_CASE("init_model is deterministic in the seed") {
  const Model a = tiny_model(11), b = tiny_model(11), c = tiny_model(12);
  CHECK(a.params() == b.params());
  CHECK(a.params() != c.params());
  const Model linear = tiny_model(5, {});
  CHECK(linear.layers(Head::kPolicy).size() == 1);
  CHECK(linear.size() == (34 + 1) + (17 + 1) + 1);
}

TEST_CASE("init_model uses the scaled uniform bound and zero biases") {
  const Model m = tiny_model(9);
  for (Head h : {Head::kPolicy, Head::kFlow}) {
    for (const LayerShape& l : m.layers(h)) {
      const double bound = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
      for (std::size_t i = 0; i < l.in * l.out; ++i) {
        CHECK(std::abs(m.params()[l.weight_offset + i]) <= bound);
      }
      for (std::size_t i = 0; i < l.out; ++i) {
        CHECK(m.params()[l.bias_offset + i] == 0.0);
      }
    }
  }
  CHECK(m.log_z() == 0.0);
}

TEST_CASE("action_scores") {
  std::mt19937_64 rng(1);
  const Model zero = zero_model();
  std::vector<FeatureVector> acts;
  for (int i = 0; i < 3; ++i) acts.push_back(random_features(zero.action_size(), rng));
  CHECK(action_scores(zero, acts) == std::vector<double>{0.0, 0.0, 0.0});

  const Model m = tiny_model();
  const auto scores = action_scores(m, acts);
  std::vector<FeatureVector> permuted{acts[2], acts[0], acts[1]};
  CHECK(action_scores(m, permuted) ==
        std::vector<double>{scores[2], scores[0], scores[1]});
  CHECK(action_scores(m, std::vector<FeatureVector>{acts[1]}).size() == 1);
  CHECK_THROWS_AS(action_scores(m, std::vector<FeatureVector>{}), Error);
  CHECK_THROWS_AS(action_scores(m, std::vector<FeatureVector>{FeatureVector(5, 0.0)}),
                  Error);
}

TEST_CASE("policy_probs") {
  const auto half = policy_probs(std::vector<double>{0.0, 0.0});
  CHECK(half[0] == 0.5);
  CHECK(half[1] == 0.5);
  const auto third = policy_probs(std::vector<double>{0.0, std::log(2.0)});
  CHECK(third[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(third[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));

  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s = random_features(7, rng);
    for (double& x : s) x *= 30.0;
    const double shift = std::uniform_real_distribution<double>(-500, 500)(rng);
    std::vector<double> shifted = s;
    for (double& x : shifted) x += shift;
    const auto p = policy_probs(s), q = policy_probs(shifted);
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      CHECK(p[i] > 0.0);
      CHECK(p[i] == doctest::Approx(q[i]).epsilon(1e-9));
      sum += p[i];
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
  CHECK_THROWS_AS(policy_probs(std::vector<double>{0.0, NAN}), Error);
  CHECK_THROWS_AS(policy_probs(std::vector<double>{}), Error);
}

TEST_CASE("log_flow") {
  std::mt19937_64 rng(2);
  const FeatureVector s = random_features(17, rng);
  CHECK(log_flow(zero_model(), s) == 0.0);
  const Model a = tiny_model(1), b = tiny_model(2);
  CHECK(log_flow(a, s) == log_flow(a, s));
  CHECK(log_flow(a, s) != log_flow(b, s));
  CHECK_THROWS_AS(log_flow(a, FeatureVector(3, 1.0)), Error);
}

TEST_CASE("sparse and dense inputs agree") {
  // The first layer skips zero inputs; compare against a dense evaluation.
  std::mt19937_64 rng(8);
  const Model m = tiny_model(6, {4});
  FeatureVector x = random_features(m.state_size(), rng);
  for (std::size_t i = 0; i < x.size(); i += 3) x[i] = 0.0;
  const LayerShape l0 = m.layers(Head::kFlow)[0];
  const LayerShape l1 = m.layers(Head::kFlow)[1];
  const auto& p = m.params();
  double out = p[l1.bias_offset];
  for (std::size_t h = 0; h < l0.out; ++h) {
    double z = p[l0.bias_offset + h];
    for (std::size_t i = 0; i < l0.in; ++i) z += p[l0.weight_offset + h * l0.in + i] * x[i];
    out += p[l1.weight_offset + h] * std::tanh(z);
  }
  CHECK(log_flow(m, x) == doctest::Approx(out).epsilon(1e-14));
}

TEST_CASE("adam_step") {
  Model m = tiny_model(3, {});
  OptState opt = OptState::for_model(m, 1e-3);
  const std::vector<double> before = m.params();
  adam_step(m, std::vector<double>(m.size(), 0.0), opt);
  CHECK(m.params() == before);
  CHECK(opt.step == 1);

  // Hand-computed two steps for parameters 0 and 1.
  Model n = tiny_model(3, {});
  OptState o = OptState::for_model(n, 1e-3);
  const double p0 = n.params()[0], p1 = n.params()[1];
  std::vector<double> g(n.size(), 0.0);
  g[0] = 0.5;
  g[1] = -2.0;
  adam_step(n, g, o);
  CHECK(n.params()[0] == doctest::Approx(p0 - 1e-3 * 0.5 / (0.5 + 1e-8)).epsilon(1e-15));
  CHECK(n.params()[1] == doctest::Approx(p1 + 1e-3 * 2.0 / (2.0 + 1e-8)).epsilon(1e-15));
  const double q0 = n.params()[0];
  g[0] = 0.1;
  adam_step(n, g, o);
  const double m2 = 0.9 * (0.1 * 0.5) + 0.1 * 0.1;
  const double v2 = 0.999 * (0.001 * 0.25) + 0.001 * 0.01;
  const double m_hat = m2 / (1 - 0.81), v_hat = v2 / (1 - 0.999 * 0.999);
  CHECK(n.params()[0] == doctest::Approx(q0 - 1e-3 * m_hat / (std::sqrt(v_hat) + 1e-8)).epsilon(1e-14));

  std::vector<double> bad(n.size(), 0.0);
  bad[3] = NAN;
  CHECK_THROWS_AS(adam_step(n, bad, o), Error);
  CHECK_THROWS_AS(adam_step(n, std::vector<double>(2, 0.0), o), Error);
}

TEST_CASE("two accumulated half-batches equal one full batch") {
  const Model m = tiny_model(4);
  const BoundaryConfig boundary;
  const FeaturizedBatch b1 = random_batch(m, 3, {false, true}, 1);
  const FeaturizedBatch b2 = random_batch(m, 4, {true}, 2);
  const auto g1 = dble_loss(m, b1, boundary).grads;
  const auto g2 = dble_loss(m, b2, boundary).grads;

  // Full-batch gradient of (L1 + L2) / 2 from finite differences on a few
  // coordinates, plus the analytic sum.
  GradAccumulator acc(m.size());
  acc.add(g1);
  acc.add(g2);
  const auto mean = acc.mean();
  for (std::size_t i : {std::size_t{0}, std::size_t{40}, m.size() - 2}) {
    Model plus = m, minus = m;
    plus.params()[i] += 1e-6;
    minus.params()[i] -= 1e-6;
    const double lp = (dble_loss(plus, b1, boundary).loss + dble_loss(plus, b2, boundary).loss) / 2;
    const double lm = (dble_loss(minus, b1, boundary).loss + dble_loss(minus, b2, boundary).loss) / 2;
    CHECK(mean[i] == doctest::Approx((lp - lm) / 2e-6).epsilon(1e-6));
  }

  Model stepped_acc = m, stepped_full = m;
  OptState oa = OptState::for_model(m, 1e-3), of = OptState::for_model(m, 1e-3);
  std::vector<double> full(m.size());
  for (std::size_t i = 0; i < full.size(); ++i) full[i] = (g1[i] + g2[i]) / 2.0;
  adam_step(stepped_acc, mean, oa);
  adam_step(stepped_full, full, of);
  for (std::size_t i = 0; i < m.size(); ++i) {
    CHECK(stepped_acc.params()[i] == doctest::Approx(stepped_full.params()[i]).epsilon(1e-15));
  }
  acc.reset();
  CHECK(acc.count() == 0);
}

TEST_CASE("grad_check on the small fixtures") {
  const Model m = tiny_model(21);
  const BoundaryConfig boundary;
  const FeaturizedBatch batch = random_batch(m, 3, {false, false, true}, 5);
  auto check = [&](const LossFn& fn) {
    const GradCheckReport r = grad_check(m, fn, 1e-5);
    CHECK(r.checked >= 100);
    CHECK(r.max_rel_error <= 1e-4);
  };
  check([&](const Model& mm) {
    auto r = dble_loss(mm, batch, boundary);
    return LossAndGrad{r.loss, r.grads};
  });
  check([&](const Model& mm) {
    auto r = sft_loss(mm, batch);
    return LossAndGrad{r.loss, r.grads};
  });
  std::mt19937_64 rng(3);
  const FeaturizedPair pair{random_features(m.action_size(), rng),
                            random_features(m.action_size(), rng)};
  check([&](const Model& mm) {
    auto r = prm_loss(mm, pair);
    return LossAndGrad{r.loss, r.grads};
  });
}

TEST_CASE("grad_check flags a wrong gradient") {
  const Model m = tiny_model(21);
  const FeaturizedBatch batch = random_batch(m, 3, {}, 5);
  const GradCheckReport r = grad_check(m, [&](const Model& mm) {
    auto res = sft_loss(mm, batch);
    for (double& g : res.grads) g *= 1.01;
    return LossAndGrad{res.loss, res.grads};
  }, 1e-5);
  CHECK(r.max_rel_error > 1e-3);
}

TEST_CASE("checkpoint round trip is bit-faithful") {
  Model m = tiny_model(77);
  m.set_log_z(0.1 + 1e-17);
  m.params()[5] = 1.0 / 3.0;
  m.train_digest = "abc";
  const std::string json = checkpoint_to_json(m);
  const Model back = checkpoint_from_json(json);
  CHECK(back == m);
  CHECK(std::memcmp(back.params().data(), m.params().data(),
                    m.size() * sizeof(double)) == 0);
  CHECK(checkpoint_to_json(back) == json);
  CHECK_THROWS_AS(checkpoint_from_json("{}"), Error);
  CHECK_THROWS_AS(checkpoint_from_json("not json"), Error);
}
