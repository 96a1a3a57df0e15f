#pragma once

#include <random>
#include <vector>

#include "graphflow/flow_model.hpp"
#include "graphflow/objectives.hpp"

namespace testing_support {

using namespace graphflow;

inline EncoderConfig tiny_encoder() {
  EncoderConfig cfg;
  cfg.dim = 8;
  return cfg;
}

inline Model tiny_model(std::uint64_t seed = 3,
                        std::vector<std::size_t> hidden = {6, 5}) {
  HiddenSpec spec;
  spec.layers = std::move(hidden);
  return init_model(tiny_encoder(), MdpConfig{}, spec, seed);
}

inline Model zero_model(std::vector<std::size_t> hidden = {6, 5}) {
  Model m = tiny_model(1, std::move(hidden));
  for (double& p : m.params()) p = 0.0;
  return m;
}

// Dense random features in [-1, 1].
inline FeatureVector random_features(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  FeatureVector v(n);
  for (double& x : v) x = u(rng);
  return v;
}

// Anchor plus `k` candidates; the ones listed in `terminal` stop.
inline FeaturizedBatch random_batch(const Model& model, std::size_t candidates,
                                    std::vector<bool> terminal,
                                    std::uint64_t seed, bool initial = false) {
  std::mt19937_64 rng(seed);
  FeaturizedBatch b;
  b.anchor = random_features(model.state_size(), rng);
  b.anchor_is_initial = initial;
  for (std::size_t i = 0; i < candidates; ++i) {
    CandidateFeatures c;
    c.action = random_features(model.action_size(), rng);
    c.terminal = i < terminal.size() && terminal[i];
    if (c.terminal) {
      c.terminal_log_reward = std::uniform_real_distribution<double>(-1, 1)(rng);
    } else {
      c.next_state = random_features(model.state_size(), rng);
    }
    b.candidates.push_back(std::move(c));
  }
  return b;
}

inline FeaturizedTrajectory random_trajectory(const Model& model,
                                              std::vector<std::size_t> widths,
                                              std::vector<std::size_t> chosen,
                                              double reward,
                                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  FeaturizedTrajectory t;
  t.reward = reward;
  for (std::size_t s = 0; s < widths.size(); ++s) {
    FeaturizedStep step;
    step.state = random_features(model.state_size(), rng);
    for (std::size_t c = 0; c < widths[s]; ++c) {
      step.candidates.push_back(random_features(model.action_size(), rng));
    }
    step.chosen = chosen[s];
    t.steps.push_back(std::move(step));
  }
  return t;
}

}  // namespace testing_support
