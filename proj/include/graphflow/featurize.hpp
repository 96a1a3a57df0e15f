#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "graphflow/mdp.hpp"
#include "graphflow/text_encoder.hpp"

namespace graphflow {

// Turns states and state-action pairs into fixed-length feature vectors.
//
//   state:  embed(query) | embed(last window_size docs) | depth / depth_cutoff
//   action: state | embed(candidate doc) | embed(relation) | is_stop
//
// The history window concatenates each document's first doc_cutoff tokens
// before hashing, so n-grams may span a document boundary.
class Featurizer {
 public:
  Featurizer(const Graph& graph, const TextEncoder& encoder, MdpConfig mdp);

  const Graph& graph() const { return *graph_; }
  const TextEncoder& encoder() const { return *encoder_; }
  const MdpConfig& mdp() const { return mdp_; }
  std::size_t dim() const { return encoder_->config().dim; }
  std::size_t state_size() const { return 2 * dim() + 1; }
  std::size_t action_size() const { return 4 * dim() + 2; }

  FeatureVector state_features(const State& state) const;

  // Throws kInvalidArgument when `action` is not a candidate at `state`.
  FeatureVector action_features(const State& state,
                                const Action& action) const;

  // Features for every action in `actions`, which the caller guarantees are
  // candidates at `state`.
  std::vector<FeatureVector> action_features(
      const State& state, std::span<const Action> actions) const;

  const Embedding& node_embedding(NodeIndex node) const {
    return node_embeddings_.at(node);
  }
  const DocumentIndex& document_index() const { return index_; }

 private:
  FeatureVector action_from_state(const FeatureVector& state_feats,
                                  const State& state,
                                  const Action& action) const;
  const Embedding& relation_embedding(const std::string& relation) const;

  const Graph* graph_;
  const TextEncoder* encoder_;
  MdpConfig mdp_;
  DocumentIndex index_;
  std::vector<Embedding> node_embeddings_;
  std::vector<std::vector<std::string>> node_tokens_;  // truncated
  std::unordered_map<std::string, Embedding> relation_embeddings_;
  Embedding zero_;
};

}  // namespace graphflow
