#include "cfedgr/synthetic.hpp"

#include <algorithm>
#include <cmath>

namespace cfedgr {

Dataset make_synthetic_dataset(int num_users, int num_items, int min_per_user, int max_per_user,
                               double min_rating, double max_rating, uint64_t seed,
                               const std::string& name) {
  if (num_users < 1 || num_items < 2) throw ConfigError("synthetic dataset needs users and items");
  if (min_per_user < 1 || max_per_user < min_per_user || max_per_user > num_items) {
    throw ConfigError("bad per-user interaction bounds");
  }

  const int rank = 4;
  Rng rng(derive_seed(seed, "synthetic"));

  // Planted structure: user/item biases plus a low-rank preference term, so
  // similar users genuinely share tastes.
  Matrix user_factors(num_users, rank), item_factors(num_items, rank);
  Vec user_bias(num_users), item_bias(num_items);
  for (double& x : user_factors.data) x = rng.normal();
  for (double& x : item_factors.data) x = rng.normal();
  for (double& x : user_bias) x = 0.5 * rng.normal();
  for (double& x : item_bias) x = 0.5 * rng.normal();

  double mid = 0.5 * (min_rating + max_rating);

  Dataset ds;
  ds.name = name;
  ds.num_users = num_users;
  ds.num_items = num_items;
  ds.min_rating = min_rating;
  ds.max_rating = max_rating;

  for (int u = 0; u < num_users; ++u) {
    int count = min_per_user + static_cast<int>(rng.below(static_cast<uint64_t>(max_per_user - min_per_user + 1)));
    auto items = sample_without_replacement(num_items, count, rng);
    std::sort(items.begin(), items.end());
    for (int i : items) {
      double score = mid + user_bias[u] + item_bias[i] + 0.6 * dot(user_factors.row(u), item_factors.row(i)) +
                     0.3 * rng.normal();
      double rating = std::clamp(std::round(score), min_rating, max_rating);
      ds.triples.push_back({u, i, rating});
    }
  }

  ds.user_labels.resize(num_users);
  ds.item_labels.resize(num_items);
  for (int u = 0; u < num_users; ++u) ds.user_labels[u] = std::to_string(u + 1);
  for (int i = 0; i < num_items; ++i) ds.item_labels[i] = std::to_string(i + 1);
  return ds;
}

Dataset make_toy_dataset() {
  return make_synthetic_dataset(50, 40, 8, 20, 1.0, 5.0, 7, "toy-50");
}

}  // namespace cfedgr
