#include "graphflow/flow_model.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <limits>

#include <json.hpp>

#include "graphflow/error.hpp"
#include "graphflow/rng.hpp"

namespace graphflow {

using nlohmann::json;

const char* to_string(Activation a) {
  return a == Activation::kTanh ? "tanh" : "relu";
}

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  throw Error(ErrorKind::kInvalidArgument,
              "unknown activation " + std::string(name));
}

namespace {

std::vector<LayerShape> plan_layers(std::size_t input,
                                    const std::vector<std::size_t>& hidden,
                                    std::size_t& offset) {
  std::vector<LayerShape> layers;
  std::size_t in = input;
  auto add = [&](std::size_t out) {
    LayerShape l{in, out, offset, offset + in * out};
    offset += in * out + out;
    layers.push_back(l);
    in = out;
  };
  for (std::size_t h : hidden) add(h);
  add(1);
  return layers;
}

double activate(Activation a, double x) {
  return a == Activation::kTanh ? std::tanh(x) : std::max(0.0, x);
}

// Derivative expressed through the activation output y.
double activate_grad(Activation a, double y) {
  return a == Activation::kTanh ? 1.0 - y * y : (y > 0.0 ? 1.0 : 0.0);
}

}  // namespace

Model::Model(EncoderConfig encoder, MdpConfig mdp, HiddenSpec hidden,
             std::uint64_t init_seed)
    : encoder_(std::move(encoder)),
      mdp_(mdp),
      hidden_(std::move(hidden)),
      init_seed_(init_seed) {
  encoder_.validate();
  for (std::size_t h : hidden_.layers) {
    if (h == 0) throw Error(ErrorKind::kInvalidArgument, "zero-width layer");
  }
  std::size_t offset = 0;
  policy_layers_ = plan_layers(action_size(), hidden_.layers, offset);
  flow_layers_ = plan_layers(state_size(), hidden_.layers, offset);
  params_.assign(offset + 1, 0.0);
}

Model init_model(const EncoderConfig& encoder, const MdpConfig& mdp,
                 const HiddenSpec& hidden, std::uint64_t seed) {
  Model model(encoder, mdp, hidden, seed);
  Rng rng(seed);
  auto& p = model.params();
  for (Head head : {Head::kPolicy, Head::kFlow}) {
    for (const LayerShape& l : model.layers(head)) {
      const double bound =
          std::sqrt(6.0 / static_cast<double>(l.in + l.out));
      for (std::size_t i = 0; i < l.in * l.out; ++i) {
        p[l.weight_offset + i] = (2.0 * uniform01(rng) - 1.0) * bound;
      }
    }
  }
  return model;
}

double head_forward(const Model& model, Head head,
                    std::span<const double> input, Tape* tape) {
  const auto layers = model.layers(head);
  const std::size_t expected = layers.front().in;
  if (input.size() != expected) {
    throw Error(ErrorKind::kInvalidArgument,
                "feature length " + std::to_string(input.size()) +
                    " != expected " + std::to_string(expected));
  }
  const auto& p = model.params();
  const Activation act = model.hidden().activation;

  // Hashed features are sparse; the first layer only visits nonzeros.
  std::vector<std::size_t> nonzero;
  for (std::size_t i = 0; i < input.size(); ++i) {
    if (input[i] != 0.0) nonzero.push_back(i);
  }

  if (tape) {
    tape->input.assign(input.begin(), input.end());
    tape->activations.clear();
  }
  std::vector<double> current;
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const LayerShape& l = layers[li];
    std::vector<double> next(l.out);
    for (std::size_t o = 0; o < l.out; ++o) {
      const double* row = &p[l.weight_offset + o * l.in];
      double z = p[l.bias_offset + o];
      if (li == 0) {
        for (std::size_t i : nonzero) z += row[i] * input[i];
      } else {
        for (std::size_t i = 0; i < l.in; ++i) z += row[i] * current[i];
      }
      next[o] = li + 1 < layers.size() ? activate(act, z) : z;
    }
    current = std::move(next);
    if (tape && li + 1 < layers.size()) tape->activations.push_back(current);
  }
  return current[0];
}

void head_backward(const Model& model, Head head, const Tape& tape,
                   double upstream, std::span<double> grads) {
  const auto layers = model.layers(head);
  const auto& p = model.params();
  const Activation act = model.hidden().activation;
  if (grads.size() != p.size()) {
    throw Error(ErrorKind::kInvalidArgument, "gradient size mismatch");
  }

  std::vector<double> delta{upstream};  // dL/dz of the current layer
  for (std::size_t li = layers.size(); li-- > 0;) {
    const LayerShape& l = layers[li];
    const std::vector<double>& in =
        li == 0 ? tape.input : tape.activations[li - 1];
    std::vector<std::size_t> nonzero;
    for (std::size_t i = 0; i < l.in; ++i) {
      if (in[i] != 0.0) nonzero.push_back(i);
    }
    for (std::size_t o = 0; o < l.out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      grads[l.bias_offset + o] += d;
      double* grow = &grads[l.weight_offset + o * l.in];
      for (std::size_t i : nonzero) grow[i] += d * in[i];
    }
    if (li == 0) break;
    std::vector<double> prev(l.in, 0.0);
    for (std::size_t o = 0; o < l.out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* row = &p[l.weight_offset + o * l.in];
      for (std::size_t i = 0; i < l.in; ++i) prev[i] += row[i] * d;
    }
    for (std::size_t i = 0; i < l.in; ++i) {
      prev[i] *= activate_grad(act, in[i]);
    }
    delta = std::move(prev);
  }
}

std::vector<double> action_scores(const Model& model,
                                  std::span<const FeatureVector> action_feats) {
  if (action_feats.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "action_scores needs >= 1 action");
  }
  std::vector<double> out;
  out.reserve(action_feats.size());
  for (const FeatureVector& f : action_feats) {
    out.push_back(head_forward(model, Head::kPolicy, f));
  }
  return out;
}

double log_sum_exp(std::span<const double> values) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : values) m = std::max(m, v);
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

std::vector<double> policy_probs(std::span<const double> scores,
                                 double temperature) {
  if (scores.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "policy_probs needs >= 1 score");
  }
  if (!(temperature > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "temperature must be positive");
  }
  double m = -std::numeric_limits<double>::infinity();
  for (double s : scores) {
    if (std::isnan(s)) throw Error(ErrorKind::kNumerical, "NaN score");
    m = std::max(m, s);
  }
  if (!std::isfinite(m)) {
    throw Error(ErrorKind::kNumerical, "no finite score");
  }
  std::vector<double> out(scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp((scores[i] - m) / temperature);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

double log_flow(const Model& model, std::span<const double> state_feats) {
  return head_forward(model, Head::kFlow, state_feats);
}

OptState OptState::for_model(const Model& model, double lr,
                             std::size_t accumulation_steps) {
  OptState opt;
  opt.lr = lr;
  opt.accumulation_steps = accumulation_steps;
  opt.m.assign(model.size(), 0.0);
  opt.v.assign(model.size(), 0.0);
  return opt;
}

void adam_step(Model& model, std::span<const double> grads, OptState& opt) {
  auto& p = model.params();
  if (grads.size() != p.size() || opt.m.size() != p.size() ||
      opt.v.size() != p.size()) {
    throw Error(ErrorKind::kInvalidArgument, "adam_step shape mismatch");
  }
  for (double g : grads) {
    if (!std::isfinite(g)) {
      throw Error(ErrorKind::kNumerical, "non-finite gradient");
    }
  }
  ++opt.step;
  const double t = static_cast<double>(opt.step);
  const double c1 = 1.0 - std::pow(opt.beta1, t);
  const double c2 = 1.0 - std::pow(opt.beta2, t);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double g = grads[i];
    opt.m[i] = opt.beta1 * opt.m[i] + (1.0 - opt.beta1) * g;
    opt.v[i] = opt.beta2 * opt.v[i] + (1.0 - opt.beta2) * g * g;
    if (opt.m[i] == 0.0) continue;
    const double m_hat = opt.m[i] / c1;
    const double v_hat = opt.v[i] / c2;
    p[i] -= opt.lr * m_hat / (std::sqrt(v_hat) + opt.eps);
  }
}

void GradAccumulator::add(std::span<const double> grads) {
  if (grads.size() != sum_.size()) {
    throw Error(ErrorKind::kInvalidArgument, "accumulator size mismatch");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) sum_[i] += grads[i];
  ++count_;
}

std::vector<double> GradAccumulator::mean() const {
  std::vector<double> out = sum_;
  if (count_ > 0) {
    const double inv = 1.0 / static_cast<double>(count_);
    for (double& v : out) v *= inv;
  }
  return out;
}

void GradAccumulator::reset() {
  std::fill(sum_.begin(), sum_.end(), 0.0);
  count_ = 0;
}

GradCheckReport grad_check(const Model& model, const LossFn& loss_fn, double h,
                           std::size_t samples, std::uint64_t seed) {
  const LossAndGrad base = loss_fn(model);
  if (!std::isfinite(base.loss)) {
    throw Error(ErrorKind::kNumerical, "non-finite loss in grad_check");
  }
  Rng rng(seed);
  std::vector<std::size_t> indices;
  for (std::size_t i = 0; i < samples; ++i) {
    indices.push_back(uniform_index(rng, model.size()));
  }
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < base.grads.size(); ++i) {
    if (base.grads[i] != 0.0) active.push_back(i);
  }
  shuffle(active, rng);
  if (active.size() > samples) active.resize(samples);
  indices.insert(indices.end(), active.begin(), active.end());

  // Below this magnitude a central difference is mostly cancellation noise.
  const double floor = std::max(
      1e-8, 1e6 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(base.loss)) / h);
  GradCheckReport report;
  Model probe = model;
  for (std::size_t idx : indices) {
    const double original = probe.params()[idx];
    probe.params()[idx] = original + h;
    const double up = loss_fn(probe).loss;
    probe.params()[idx] = original - h;
    const double down = loss_fn(probe).loss;
    probe.params()[idx] = original;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw Error(ErrorKind::kNumerical, "non-finite loss in grad_check");
    }
    const double numeric = (up - down) / (2.0 * h);
    const double analytic = base.grads[idx];
    const double rel = std::abs(analytic - numeric) /
                       std::max(floor, std::abs(analytic) + std::abs(numeric));
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_index = idx;
    }
    ++report.checked;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr const char* kCheckpointFormat = "graphflow-checkpoint";
constexpr int kCheckpointVersion = 1;

void append_double(std::string& out, double v) {
  if (!std::isfinite(v)) {
    throw Error(ErrorKind::kNumerical, "non-finite weight in checkpoint");
  }
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

void append_array(std::string& out, const std::vector<double>& p,
                  std::size_t begin, std::size_t count) {
  out += '[';
  for (std::size_t i = 0; i < count; ++i) {
    if (i) out += ',';
    append_double(out, p[begin + i]);
  }
  out += ']';
}

void append_head(std::string& out, const Model& model, Head head) {
  out += '[';
  bool first = true;
  for (const LayerShape& l : model.layers(head)) {
    if (!first) out += ',';
    first = false;
    out += "\n    {\"in\":" + std::to_string(l.in) +
           ",\"out\":" + std::to_string(l.out) + ",\"weight\":";
    append_array(out, model.params(), l.weight_offset, l.in * l.out);
    out += ",\"bias\":";
    append_array(out, model.params(), l.bias_offset, l.out);
    out += '}';
  }
  out += "\n  ]";
}

json encoder_to_json(const EncoderConfig& e) {
  return {{"dim", e.dim},
          {"ngram_orders", e.ngram_orders},
          {"doc_cutoff", e.doc_cutoff},
          {"window_size", e.window_size},
          {"hash_seed", e.hash_seed}};
}

void load_head(const json& arr, Model& model, Head head) {
  const auto layers = model.layers(head);
  if (!arr.is_array() || arr.size() != layers.size()) {
    throw Error(ErrorKind::kParse, "checkpoint head layer count mismatch");
  }
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const LayerShape& l = layers[li];
    const json& layer = arr[li];
    if (layer.at("in").get<std::size_t>() != l.in ||
        layer.at("out").get<std::size_t>() != l.out) {
      throw Error(ErrorKind::kParse, "checkpoint layer shape mismatch");
    }
    const json& w = layer.at("weight");
    const json& b = layer.at("bias");
    if (w.size() != l.in * l.out || b.size() != l.out) {
      throw Error(ErrorKind::kParse, "checkpoint weight count mismatch");
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      model.params()[l.weight_offset + i] = w[i].get<double>();
    }
    for (std::size_t i = 0; i < b.size(); ++i) {
      model.params()[l.bias_offset + i] = b[i].get<double>();
    }
  }
}

}  // namespace

std::string checkpoint_to_json(const Model& model) {
  json header = {
      {"format", kCheckpointFormat},
      {"version", kCheckpointVersion},
      {"encoder", encoder_to_json(model.encoder_config())},
      {"mdp",
       {{"depth_cutoff", model.mdp_config().depth_cutoff},
        {"allow_revisits", model.mdp_config().allow_revisits}}},
      {"hidden", model.hidden().layers},
      {"activation", to_string(model.hidden().activation)},
      {"init_seed", model.init_seed()},
      {"train_digest", model.train_digest},
  };
  std::string out = "{\n";
  for (auto it = header.begin(); it != header.end(); ++it) {
    out += "  \"" + it.key() + "\": " + it.value().dump() + ",\n";
  }
  out += "  \"log_z\": ";
  append_double(out, model.log_z());
  out += ",\n  \"policy_head\": ";
  append_head(out, model, Head::kPolicy);
  out += ",\n  \"flow_head\": ";
  append_head(out, model, Head::kFlow);
  out += "\n}\n";
  return out;
}

Model checkpoint_from_json(std::string_view text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw Error(ErrorKind::kParse, "checkpoint is not valid JSON");
  }
  try {
    if (doc.at("format").get<std::string>() != kCheckpointFormat) {
      throw Error(ErrorKind::kParse, "not a graphflow checkpoint");
    }
    if (doc.at("version").get<int>() != kCheckpointVersion) {
      throw Error(ErrorKind::kParse, "unsupported checkpoint version");
    }
    const json& e = doc.at("encoder");
    EncoderConfig enc;
    enc.dim = e.at("dim").get<std::size_t>();
    enc.ngram_orders = e.at("ngram_orders").get<std::vector<int>>();
    enc.doc_cutoff = e.at("doc_cutoff").get<std::size_t>();
    enc.window_size = e.at("window_size").get<std::size_t>();
    enc.hash_seed = e.at("hash_seed").get<std::uint64_t>();
    MdpConfig mdp;
    mdp.depth_cutoff = doc.at("mdp").at("depth_cutoff").get<int>();
    mdp.allow_revisits = doc.at("mdp").at("allow_revisits").get<bool>();
    HiddenSpec hidden;
    hidden.layers = doc.at("hidden").get<std::vector<std::size_t>>();
    hidden.activation =
        parse_activation(doc.at("activation").get<std::string>());
    Model model(enc, mdp, hidden, doc.at("init_seed").get<std::uint64_t>());
    model.train_digest = doc.at("train_digest").get<std::string>();
    model.set_log_z(doc.at("log_z").get<double>());
    load_head(doc.at("policy_head"), model, Head::kPolicy);
    load_head(doc.at("flow_head"), model, Head::kFlow);
    return model;
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::kParse, std::string("checkpoint: ") + ex.what());
  }
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  write_file(path, checkpoint_to_json(model));
}

Model load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(read_file(path));
}

}  // namespace graphflow
