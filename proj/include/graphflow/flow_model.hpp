#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "graphflow/mdp.hpp"
#include "graphflow/text_encoder.hpp"

namespace graphflow {

enum class Activation { kTanh, kRelu };

const char* to_string(Activation a);
Activation parse_activation(std::string_view name);

struct HiddenSpec {
  std::vector<std::size_t> layers = {128, 128};
  Activation activation = Activation::kTanh;

  bool operator==(const HiddenSpec&) const = default;
};

// Dense layer view into the flat parameter vector. Weights are row-major
// [out][in].
struct LayerShape {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;

  bool operator==(const LayerShape&) const = default;
};

enum class Head { kPolicy, kFlow };

// Policy head r(s, a) over action features and flow head log F(s) over state
// features, both MLPs with a scalar linear output, plus a scalar log Z used by
// trajectory balance. All parameters live in one flat vector so gradients,
// optimizer moments and checkpoints share a single layout.
class Model {
 public:
  Model() = default;
  Model(EncoderConfig encoder, MdpConfig mdp, HiddenSpec hidden,
        std::uint64_t init_seed);

  const EncoderConfig& encoder_config() const { return encoder_; }
  const MdpConfig& mdp_config() const { return mdp_; }
  const HiddenSpec& hidden() const { return hidden_; }
  std::uint64_t init_seed() const { return init_seed_; }

  std::size_t state_size() const { return 2 * encoder_.dim + 1; }
  std::size_t action_size() const { return 4 * encoder_.dim + 2; }

  std::span<const LayerShape> layers(Head head) const {
    return head == Head::kPolicy ? policy_layers_ : flow_layers_;
  }
  std::size_t log_z_index() const { return params_.size() - 1; }
  double log_z() const { return params_.back(); }
  void set_log_z(double value) { params_.back() = value; }

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  std::size_t size() const { return params_.size(); }

  std::string train_digest;

  bool operator==(const Model&) const = default;

 private:
  EncoderConfig encoder_;
  MdpConfig mdp_;
  HiddenSpec hidden_;
  std::uint64_t init_seed_ = 0;
  std::vector<LayerShape> policy_layers_;
  std::vector<LayerShape> flow_layers_;
  std::vector<double> params_;
};

// Scaled-uniform (Glorot) weights, zero biases, log Z = 0. Deterministic in
// `seed`.
Model init_model(const EncoderConfig& encoder, const MdpConfig& mdp,
                 const HiddenSpec& hidden, std::uint64_t seed);

// Activations recorded by a forward pass for the matching backward pass.
struct Tape {
  std::vector<std::vector<double>> activations;  // per hidden layer
  std::vector<double> input;
};

double head_forward(const Model& model, Head head,
                    std::span<const double> input, Tape* tape = nullptr);

// Adds d(upstream * output)/d(params) into `grads`.
void head_backward(const Model& model, Head head, const Tape& tape,
                   double upstream, std::span<double> grads);

std::vector<double> action_scores(const Model& model,
                                  std::span<const FeatureVector> action_feats);

// Softmax with max subtraction; `temperature` divides the scores.
std::vector<double> policy_probs(std::span<const double> scores,
                                 double temperature = 1.0);

// log sum exp, stable.
double log_sum_exp(std::span<const double> values);

double log_flow(const Model& model, std::span<const double> state_feats);

struct OptState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t accumulation_steps = 1;
  std::uint64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;

  static OptState for_model(const Model& model, double lr,
                            std::size_t accumulation_steps = 1);
};

// One bias-corrected Adam update in place.
void adam_step(Model& model, std::span<const double> grads, OptState& opt);

// Sums per-example gradients in arrival order and yields their mean.
class GradAccumulator {
 public:
  explicit GradAccumulator(std::size_t size) : sum_(size, 0.0) {}

  void add(std::span<const double> grads);
  std::size_t count() const { return count_; }
  std::vector<double> mean() const;
  void reset();

 private:
  std::vector<double> sum_;
  std::size_t count_ = 0;
};

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grads;
};

using LossFn = std::function<LossAndGrad(const Model&)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t worst_index = 0;
};

// Central differences at step `h` on `samples` uniformly drawn parameters plus
// up to `samples` parameters whose analytic gradient is nonzero. Relative error
// is taken against max(|a|+|n|, roundoff floor), the floor being
// 1e6 * eps * max(1, |loss|) / h.
GradCheckReport grad_check(const Model& model, const LossFn& loss_fn, double h,
                           std::size_t samples = 100, std::uint64_t seed = 7);

// Versioned JSON; doubles written with 17 significant digits so a reload is
// bit-identical.
std::string checkpoint_to_json(const Model& model);
Model checkpoint_from_json(std::string_view text);
void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace graphflow
