#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "graphflow/kg_store.hpp"

namespace graphflow {

struct EncoderConfig {
  std::size_t dim = 1024;
  std::vector<int> ngram_orders = {1, 2};
  std::size_t doc_cutoff = 400;   // max tokens per document
  std::size_t window_size = 3;    // most-recent history documents featurized
  std::uint64_t hash_seed = 0x5eed;

  void validate() const;  // throws kInvalidArgument
  bool operator==(const EncoderConfig&) const = default;
};

// Either all-zero (no tokens) or unit L2 norm.
using Embedding = std::vector<double>;
using FeatureVector = std::vector<double>;

// Lowercases ASCII and splits on every non-alphanumeric byte. Bytes >= 0x80
// count as alphanumeric so UTF-8 words stay intact.
std::vector<std::string> tokenize(std::string_view text);

// Signed feature hashing of the configured n-gram orders over `tokens`
// (no truncation applied here), L2-normalized unless all-zero.
Embedding embed_tokens(std::span<const std::string> tokens,
                       const EncoderConfig& cfg);

// tokenize -> truncate to doc_cutoff -> embed_tokens.
Embedding embed(std::string_view text, const EncoderConfig& cfg);

// Dot product; 0 when either side is all-zero. Throws on dim mismatch.
double cosine(std::span<const double> a, std::span<const double> b);

// Pluggable text encoder. The hashing encoder is the built-in one; a learned
// encoder can be substituted as long as it is deterministic.
class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual const EncoderConfig& config() const = 0;
  virtual Embedding encode(std::string_view text) const = 0;
  virtual Embedding encode_tokens(std::span<const std::string> tokens) const = 0;
};

class HashingEncoder final : public TextEncoder {
 public:
  explicit HashingEncoder(EncoderConfig cfg);
  const EncoderConfig& config() const override { return cfg_; }
  Embedding encode(std::string_view text) const override;
  Embedding encode_tokens(std::span<const std::string> tokens) const override;

 private:
  EncoderConfig cfg_;
};

struct ScoredNode {
  NodeIndex node;
  double score;
};

// Cached node-document embeddings for repeated similarity ranking.
class DocumentIndex {
 public:
  DocumentIndex(const Graph& graph, const TextEncoder& encoder);

  const Graph& graph() const { return *graph_; }
  const TextEncoder& encoder() const { return *encoder_; }
  const Embedding& node_embedding(NodeIndex node) const {
    return embeddings_.at(node);
  }

  // Descending cosine to the query, ties by node id ascending.
  std::vector<ScoredNode> rank(std::string_view query, std::size_t top_k) const;

 private:
  const Graph* graph_;
  const TextEncoder* encoder_;
  std::vector<Embedding> embeddings_;
};

// Nodes by descending cosine(query, node text), ties by node id ascending.
std::vector<ScoredNode> rank_nodes(std::string_view query, const Graph& graph,
                                   std::size_t top_k,
                                   const TextEncoder& encoder);

std::vector<NodeIndex> seed_nodes(std::string_view query, const Graph& graph,
                                  std::size_t top_k,
                                  const TextEncoder& encoder);

// The dense-retriever baseline: same ranking, k results.
std::vector<NodeIndex> dense_retrieve(std::string_view query,
                                      const Graph& graph, std::size_t k,
                                      const TextEncoder& encoder);

}  // namespace graphflow
