#pragma once

#include <vector>

#include "cfedgr/common.hpp"

namespace cfedgr {

using EmbeddingTable = Matrix;  // rows x d, one embedding per row

struct GatLayerParams {
  Matrix weight;      // d_out x d_in
  Vec attn;           // length 2*d_out: [attn applied to the updated node | attn applied to the contributor]
  double leaky_slope = 0.2;
};

struct ModelParams {
  GatLayerParams layer1;
  GatLayerParams layer2;
};

// Star-shaped local graph: the center user connects to every interacted item
// and every assigned neighbor user; items and neighbors are leaves.
struct LocalGraph {
  Vec user_emb;              // center, dim d
  std::vector<int> item_ids;
  Matrix item_embs;          // q x d
  Vec ratings;               // q, aligned with item_ids
  Matrix neighbor_embs;      // p x d

  int num_items() const { return item_embs.rows; }
  int num_neighbors() const { return neighbor_embs.rows; }
};

// Gradients of the client loss. Neighbor embeddings are treated as constants
// and receive no gradient.
struct LocalGradients {
  ModelParams theta;         // same shapes as the model, leaky_slope unused
  Vec user;                  // d
  std::vector<int> item_ids;
  Matrix items;              // q x d aligned with item_ids
};

// Per-layer intermediates kept for the backward pass. Node 0 is the center;
// nodes 1..L are leaves (items first, then neighbors).
struct GatLayerCache {
  Matrix input;           // (L+1) x d_in
  Matrix transformed;     // (L+1) x d_out, W h
  Vec center_logits;      // L+1 raw pair scores (pre-LeakyReLU), index 0 = self-loop
  Vec center_alpha;       // L+1 attention weights at the center
  Matrix leaf_logits;     // L x 2 raw pair scores: [self, center]
  Matrix leaf_alpha;      // L x 2
  Matrix preact;          // (L+1) x d_out, attention-weighted sums before ELU
  Matrix output;          // (L+1) x d_out
};

struct ForwardCache {
  GatLayerCache layer1;
  GatLayerCache layer2;
  int num_items = 0;
  int num_neighbors = 0;
};

struct InitState {
  ModelParams model;
  EmbeddingTable user_embeddings;  // M x d
  EmbeddingTable item_embeddings;  // N x d
};

// All tensors i.i.d. uniform in [-1/sqrt(d), 1/sqrt(d)], deterministic per seed.
InitState init_params(int num_users, int num_items, int d, uint64_t seed);

// Single-head GAT layer over one star neighborhood. Every node aggregates
// over {itself} + its neighbors with softmax attention on
// LeakyReLU(a . [W h_node || W h_peer]) and an ELU output activation.
// Row 0 of `nodes` is the center; all other rows are leaves.
GatLayerCache gat_layer_forward(const GatLayerParams& params, const Matrix& nodes);

// Convenience form matching (center, leaves) -> (center_out, leaves_out).
struct GatLayerResult {
  Vec center_out;
  Matrix leaves_out;
  GatLayerCache cache;
};
GatLayerResult gat_layer_forward(const GatLayerParams& params, const Vec& center, const Matrix& leaves);

// Two stacked GAT layers over the local graph.
ForwardCache forward(const ModelParams& model, const LocalGraph& graph);

inline std::span<const double> refined_user(const ForwardCache& cache) { return cache.layer2.output.row(0); }
inline std::span<const double> refined_item(const ForwardCache& cache, int item_index) {
  return cache.layer2.output.row(1 + item_index);
}

double predict(std::span<const double> user_vec, std::span<const double> item_vec);

// Mean squared error over the q interacted items.
double loss(std::span<const double> predicted, std::span<const double> actual);

// Exact gradients of the mean-squared-error loss with respect to the GAT
// parameters, the center user embedding, and each interacted item embedding.
LocalGradients backward(const ModelParams& model, const LocalGraph& graph, const ForwardCache& cache);

}  // namespace cfedgr
