#include "cfedgr/privacy.hpp"

#include <algorithm>
#include <cstdio>

namespace cfedgr {

std::pair<std::vector<int>, Matrix> synthesize_pseudo_gradients(const Matrix& real_rows,
                                                                const std::vector<int>& candidate_items,
                                                                int n, uint64_t seed) {
  if (real_rows.rows < 1) throw ContractViolation("pseudo-gradient synthesis needs at least one real row");
  if (n < 0) throw ConfigError("pseudo item count must be nonnegative");
  if (n > static_cast<int>(candidate_items.size())) {
    std::fprintf(stderr, "cfedgr: warning: %d pseudo items requested but only %zu candidates; capping\n", n,
                 candidate_items.size());
    n = static_cast<int>(candidate_items.size());
  }

  int d = real_rows.cols;
  int q = real_rows.rows;
  Vec mean(d, 0.0), var(d, 0.0);
  for (int r = 0; r < q; ++r) {
    auto row = real_rows.row(r);
    for (int k = 0; k < d; ++k) mean[k] += row[k];
  }
  for (int k = 0; k < d; ++k) mean[k] /= q;
  for (int r = 0; r < q; ++r) {
    auto row = real_rows.row(r);
    for (int k = 0; k < d; ++k) {
      double dev = row[k] - mean[k];
      var[k] += dev * dev;
    }
  }
  for (int k = 0; k < d; ++k) var[k] /= q;  // population variance; one row -> 0

  Rng rng(derive_seed(seed, "pseudo"));
  auto picked_idx = sample_without_replacement(static_cast<int>(candidate_items.size()), n, rng);

  std::vector<int> ids(n);
  Matrix rows(n, d);
  for (int i = 0; i < n; ++i) {
    ids[i] = candidate_items[picked_idx[i]];
    auto row = rows.row(i);
    for (int k = 0; k < d; ++k) row[k] = mean[k] + std::sqrt(var[k]) * rng.normal();
  }
  return {std::move(ids), std::move(rows)};
}

void clip_l2(std::span<double> g, double delta) {
  if (delta <= 0) throw ConfigError("clip threshold must be > 0");
  double norm = l2_norm(g);
  if (norm > delta) {
    double scale = delta / norm;
    for (double& x : g) x *= scale;
  }
}

namespace {

void ldp_inplace(std::span<double> g, double delta, double lambda, Rng& rng) {
  if (!all_finite(g)) throw NumericError("non-finite gradient passed to LDP transform");
  clip_l2(g, delta);
  if (lambda > 0) {
    for (double& x : g) x += rng.laplace(lambda);
  }
}

}  // namespace

Vec apply_ldp(const Vec& g, double delta, double lambda, uint64_t seed) {
  if (lambda < 0) throw ConfigError("noise scale must be >= 0");
  Vec out = g;
  Rng rng(derive_seed(seed, "ldp"));
  ldp_inplace(out, delta, lambda, rng);
  return out;
}

Matrix apply_ldp(const Matrix& g, double delta, double lambda, uint64_t seed) {
  if (lambda < 0) throw ConfigError("noise scale must be >= 0");
  Matrix out = g;
  Rng rng(derive_seed(seed, "ldp"));
  ldp_inplace(out.data, delta, lambda, rng);
  return out;
}

ClientUpdate privatize_update(int user_id, const LocalGradients& grads, int num_items_total,
                              const PrivacyConfig& cfg, uint64_t seed) {
  if (cfg.noise_scale < 0) throw ConfigError("noise scale must be >= 0");
  int q = grads.items.rows;
  int d = grads.items.cols;

  ClientUpdate up;
  up.user_id = user_id;
  up.weight = q;
  up.grad_theta = grads.theta;
  up.grad_user = grads.user;

  Rng rng(derive_seed(seed, "privatize"));

  // Pseudo rows for items the user never touched.
  std::vector<bool> interacted(num_items_total, false);
  for (int id : grads.item_ids) interacted[id] = true;
  std::vector<int> candidates;
  candidates.reserve(num_items_total - q);
  for (int i = 0; i < num_items_total; ++i) {
    if (!interacted[i]) candidates.push_back(i);
  }
  auto [pseudo_ids, pseudo_rows] = synthesize_pseudo_gradients(grads.items, candidates, cfg.num_pseudo,
                                                               rng.next());
  int n_pseudo = static_cast<int>(pseudo_ids.size());

  // Merge and shuffle so row order carries no real/pseudo signal. With no
  // pseudo rows there is nothing to hide and the original order is kept.
  int total = q + n_pseudo;
  std::vector<int> order(total);
  for (int i = 0; i < total; ++i) order[i] = i;
  if (n_pseudo > 0) rng.shuffle(order);

  auto& sig = up.item_grads;
  sig.item_ids.resize(total);
  sig.rows = Matrix(total, d);
  sig.is_pseudo.resize(total);
  for (int dst = 0; dst < total; ++dst) {
    int src = order[dst];
    if (src < q) {
      sig.item_ids[dst] = grads.item_ids[src];
      sig.rows.set_row(dst, grads.items.row(src));
      sig.is_pseudo[dst] = 0;
    } else {
      sig.item_ids[dst] = pseudo_ids[src - q];
      sig.rows.set_row(dst, pseudo_rows.row(src - q));
      sig.is_pseudo[dst] = 1;
    }
  }

  // Clip + noise: each GAT layer as one tensor group, the user vector, and
  // every item row separately.
  for (GatLayerParams* layer : {&up.grad_theta.layer1, &up.grad_theta.layer2}) {
    double norm = std::sqrt(dot(layer->weight.data, layer->weight.data) + dot(layer->attn, layer->attn));
    if (norm > cfg.clip_threshold) {
      double scale = cfg.clip_threshold / norm;
      for (double& x : layer->weight.data) x *= scale;
      for (double& x : layer->attn) x *= scale;
    }
    if (cfg.noise_scale > 0) {
      for (double& x : layer->weight.data) x += rng.laplace(cfg.noise_scale);
      for (double& x : layer->attn) x += rng.laplace(cfg.noise_scale);
    }
  }
  ldp_inplace(up.grad_user, cfg.clip_threshold, cfg.noise_scale, rng);
  for (int r = 0; r < total; ++r) ldp_inplace(sig.rows.row(r), cfg.clip_threshold, cfg.noise_scale, rng);

  return up;
}

}  // namespace cfedgr
