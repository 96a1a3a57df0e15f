#include "graphflow/text_encoder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>

#include "graphflow/error.hpp"
#include "graphflow/rng.hpp"

namespace graphflow {

void EncoderConfig::validate() const {
  if (dim < 8) throw Error(ErrorKind::kInvalidArgument, "dim must be >= 8");
  if (doc_cutoff < 1) {
    throw Error(ErrorKind::kInvalidArgument, "doc_cutoff must be >= 1");
  }
  if (window_size < 1) {
    throw Error(ErrorKind::kInvalidArgument, "window_size must be >= 1");
  }
  if (ngram_orders.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "ngram_orders must be non-empty");
  }
  for (int n : ngram_orders) {
    if (n < 1) throw Error(ErrorKind::kInvalidArgument, "ngram order < 1");
  }
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c >= 0x80 || std::isalnum(c)) {
      current.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

Embedding embed_tokens(std::span<const std::string> tokens,
                       const EncoderConfig& cfg) {
  Embedding out(cfg.dim, 0.0);
  unsigned char seed_bytes[8];
  for (int i = 0; i < 8; ++i) {
    seed_bytes[i] = static_cast<unsigned char>(cfg.hash_seed >> (8 * i));
  }
  const std::uint64_t seeded = fnv1a(
      std::string_view(reinterpret_cast<const char*>(seed_bytes), 8));

  for (int order : cfg.ngram_orders) {
    const auto n = static_cast<std::size_t>(order);
    if (tokens.size() < n) continue;
    for (std::size_t start = 0; start + n <= tokens.size(); ++start) {
      std::uint64_t h = seeded;
      for (std::size_t j = 0; j < n; ++j) {
        if (j > 0) h = fnv1a(" ", h);
        h = fnv1a(tokens[start + j], h);
      }
      const std::size_t bucket = h % cfg.dim;
      const double sign = (h >> 63) ? -1.0 : 1.0;
      out[bucket] += sign;
    }
  }

  double norm2 = 0.0;
  for (double v : out) norm2 += v * v;
  if (norm2 > 0.0) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& v : out) v *= inv;
  }
  return out;
}

Embedding embed(std::string_view text, const EncoderConfig& cfg) {
  std::vector<std::string> tokens = tokenize(text);
  if (tokens.size() > cfg.doc_cutoff) tokens.resize(cfg.doc_cutoff);
  return embed_tokens(tokens, cfg);
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::kInvalidArgument, "embedding dimension mismatch");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  // Inputs are normally unit vectors; normalizing again keeps hand-built
  // vectors in range.
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

HashingEncoder::HashingEncoder(EncoderConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
}

Embedding HashingEncoder::encode(std::string_view text) const {
  return embed(text, cfg_);
}

Embedding HashingEncoder::encode_tokens(
    std::span<const std::string> tokens) const {
  return embed_tokens(tokens, cfg_);
}

DocumentIndex::DocumentIndex(const Graph& graph, const TextEncoder& encoder)
    : graph_(&graph), encoder_(&encoder) {
  embeddings_.reserve(graph.node_count());
  for (const NodeRecord& n : graph.nodes()) {
    embeddings_.push_back(encoder.encode(n.text));
  }
}

std::vector<ScoredNode> DocumentIndex::rank(std::string_view query,
                                            std::size_t top_k) const {
  if (graph_->node_count() == 0) {
    throw Error(ErrorKind::kInvalidArgument, "empty graph");
  }
  if (top_k < 1) throw Error(ErrorKind::kInvalidArgument, "top_k must be >= 1");
  const Embedding q = encoder_->encode(query);
  std::vector<ScoredNode> scored;
  scored.reserve(embeddings_.size());
  for (NodeIndex i = 0; i < embeddings_.size(); ++i) {
    scored.push_back({i, cosine(q, embeddings_[i])});
  }
  const std::size_t k = std::min(top_k, scored.size());
  auto before = [&](const ScoredNode& a, const ScoredNode& b) {
    if (a.score != b.score) return a.score > b.score;
    return graph_->node(a.node).id < graph_->node(b.node).id;
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<long>(k),
                    scored.end(), before);
  scored.resize(k);
  return scored;
}

std::vector<ScoredNode> rank_nodes(std::string_view query, const Graph& graph,
                                   std::size_t top_k,
                                   const TextEncoder& encoder) {
  if (graph.node_count() == 0) {
    throw Error(ErrorKind::kInvalidArgument, "empty graph");
  }
  return DocumentIndex(graph, encoder).rank(query, top_k);
}

std::vector<NodeIndex> seed_nodes(std::string_view query, const Graph& graph,
                                  std::size_t top_k,
                                  const TextEncoder& encoder) {
  std::vector<NodeIndex> out;
  for (const ScoredNode& s : rank_nodes(query, graph, top_k, encoder)) {
    out.push_back(s.node);
  }
  return out;
}

std::vector<NodeIndex> dense_retrieve(std::string_view query,
                                      const Graph& graph, std::size_t k,
                                      const TextEncoder& encoder) {
  return seed_nodes(query, graph, k, encoder);
}

}  // namespace graphflow
