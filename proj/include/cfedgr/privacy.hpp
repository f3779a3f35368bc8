#pragma once

#include <utility>
#include <vector>

#include "cfedgr/common.hpp"
#include "cfedgr/model.hpp"

namespace cfedgr {

struct PrivacyConfig {
  double clip_threshold = 0.2;  // L2 clip bound, > 0
  double noise_scale = 0.1;     // Laplace scale, >= 0
  int num_pseudo = 1000;        // pseudo-interacted items per upload
};

// Item gradient rows as uploaded. is_pseudo is in-memory bookkeeping for
// tests and is never serialized.
struct SparseItemGradients {
  std::vector<int> item_ids;
  Matrix rows;  // |item_ids| x d
  std::vector<uint8_t> is_pseudo;
};

// A client's upload: GAT parameter gradients, the user's own embedding
// gradient, item gradient rows (real and pseudo mixed), and the interaction
// count used as the aggregation weight.
struct ClientUpdate {
  int user_id = 0;
  ModelParams grad_theta;
  Vec grad_user;
  SparseItemGradients item_grads;
  int weight = 0;  // n_k = number of interacted items
};

// Draws n candidate items uniformly without replacement and gives each a
// gradient row mean + sqrt(var) * z with z standard normal per dimension,
// where mean and variance are per-dimension moments of the real rows.
// n is capped at |candidate_items| (with a warning on stderr).
std::pair<std::vector<int>, Matrix> synthesize_pseudo_gradients(const Matrix& real_rows,
                                                                const std::vector<int>& candidate_items,
                                                                int n, uint64_t seed);

// In-place L2 clip: rescales by delta/||g|| when the norm exceeds delta.
void clip_l2(std::span<double> g, double delta);

// clip(g, delta) + Laplace(0, lambda) i.i.d. per component.
Vec apply_ldp(const Vec& g, double delta, double lambda, uint64_t seed);
Matrix apply_ldp(const Matrix& g, double delta, double lambda, uint64_t seed);

// Full client-side privatization: synthesize pseudo rows, shuffle them in
// with the real rows, then clip + noise every uploaded tensor (each GAT
// layer as one group, the user vector, and each item row separately).
ClientUpdate privatize_update(int user_id, const LocalGradients& grads, int num_items_total,
                              const PrivacyConfig& cfg, uint64_t seed);

}  // namespace cfedgr
