#include "graphflow/featurize.hpp"

#include <algorithm>

#include "graphflow/error.hpp"

namespace graphflow {

Featurizer::Featurizer(const Graph& graph, const TextEncoder& encoder,
                       MdpConfig mdp)
    : graph_(&graph),
      encoder_(&encoder),
      mdp_(mdp),
      index_(graph, encoder),
      zero_(encoder.config().dim, 0.0) {
  if (mdp_.depth_cutoff < 0) {
    throw Error(ErrorKind::kInvalidArgument, "depth_cutoff must be >= 0");
  }
  const std::size_t cutoff = encoder.config().doc_cutoff;
  node_tokens_.reserve(graph.node_count());
  node_embeddings_.reserve(graph.node_count());
  for (NodeIndex i = 0; i < graph.node_count(); ++i) {
    node_embeddings_.push_back(index_.node_embedding(i));
    auto tokens = tokenize(graph.node(i).text);
    if (tokens.size() > cutoff) tokens.resize(cutoff);
    node_tokens_.push_back(std::move(tokens));
  }
  // Relation labels form a small closed set; embed them all up front so the
  // featurizer stays read-only after construction.
  for (NodeIndex i = 0; i < graph.node_count(); ++i) {
    for (const Neighbor& n : graph.neighbors(i)) {
      if (!relation_embeddings_.contains(n.relation)) {
        relation_embeddings_.emplace(n.relation, encoder.encode(n.relation));
      }
    }
  }
}

const Embedding& Featurizer::relation_embedding(
    const std::string& relation) const {
  if (relation.empty()) return zero_;
  auto it = relation_embeddings_.find(relation);
  if (it == relation_embeddings_.end()) {
    throw Error(ErrorKind::kInvalidArgument,
                "relation not present in graph: " + relation);
  }
  return it->second;
}

FeatureVector Featurizer::state_features(const State& state) const {
  if (state.path.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "state with empty path");
  }
  FeatureVector out;
  out.reserve(state_size());
  const Embedding q = encoder_->encode(state.query.text);
  out.insert(out.end(), q.begin(), q.end());

  const std::size_t window = encoder_->config().window_size;
  const std::size_t first =
      state.path.size() > window ? state.path.size() - window : 0;
  std::vector<std::string> tokens;
  for (std::size_t i = first; i < state.path.size(); ++i) {
    const auto& t = node_tokens_.at(state.path[i]);
    tokens.insert(tokens.end(), t.begin(), t.end());
  }
  const Embedding h = encoder_->encode_tokens(tokens);
  out.insert(out.end(), h.begin(), h.end());

  const double depth =
      mdp_.depth_cutoff > 0
          ? static_cast<double>(state.depth()) / mdp_.depth_cutoff
          : 0.0;
  out.push_back(depth);
  return out;
}

FeatureVector Featurizer::action_from_state(const FeatureVector& state_feats,
                                            const State& state,
                                            const Action& action) const {
  FeatureVector out;
  out.reserve(action_size());
  out.insert(out.end(), state_feats.begin(), state_feats.end());
  const NodeIndex node = action.is_stop() ? state.current() : action.target;
  const Embedding& doc = node_embeddings_.at(node);
  out.insert(out.end(), doc.begin(), doc.end());
  const Embedding& rel = relation_embedding(action.relation);
  out.insert(out.end(), rel.begin(), rel.end());
  out.push_back(action.is_stop() ? 1.0 : 0.0);
  return out;
}

FeatureVector Featurizer::action_features(const State& state,
                                          const Action& action) const {
  const auto legal = candidate_actions(*graph_, state, mdp_);
  if (std::find(legal.begin(), legal.end(), action) == legal.end()) {
    throw Error(ErrorKind::kInvalidArgument,
                "action not applicable at state");
  }
  return action_from_state(state_features(state), state, action);
}

std::vector<FeatureVector> Featurizer::action_features(
    const State& state, std::span<const Action> actions) const {
  const FeatureVector s = state_features(state);
  std::vector<FeatureVector> out;
  out.reserve(actions.size());
  for (const Action& a : actions) out.push_back(action_from_state(s, state, a));
  return out;
}

}  // namespace graphflow
