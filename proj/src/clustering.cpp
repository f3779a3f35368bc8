#include "cfedgr/clustering.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace cfedgr {

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Nearest centroid, ties to the lowest index.
int nearest(const Matrix& centroids, std::span<const double> p, double* dist_out = nullptr) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int c = 0; c < centroids.rows; ++c) {
    double d = sq_dist(centroids.row(c), p);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (dist_out) *dist_out = best_d;
  return best;
}

Matrix kmeanspp_seed(const Matrix& points, int k, Rng& rng) {
  int n = points.rows;
  Matrix centroids(k, points.cols);
  int first = static_cast<int>(rng.below(static_cast<uint64_t>(n)));
  centroids.set_row(0, points.row(first));

  Vec d2(n);
  for (int i = 0; i < n; ++i) d2[i] = sq_dist(points.row(i), centroids.row(0));

  for (int c = 1; c < k; ++c) {
    double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    int chosen;
    if (total <= 0.0) {
      chosen = static_cast<int>(rng.below(static_cast<uint64_t>(n)));  // all points coincide
    } else {
      double target = rng.uniform() * total;
      double acc = 0.0;
      chosen = n - 1;
      for (int i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target) {
          chosen = i;
          break;
        }
      }
    }
    centroids.set_row(c, points.row(chosen));
    for (int i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(points.row(i), centroids.row(c)));
  }
  return centroids;
}

}  // namespace

std::vector<int> ClusterState::cluster_sizes() const {
  std::vector<int> sizes(num_clusters, 0);
  for (int l : labels) ++sizes[l];
  return sizes;
}

double kmeans_inertia(const Matrix& points, const ClusterState& state) {
  double s = 0.0;
  for (int i = 0; i < points.rows; ++i) s += sq_dist(points.row(i), state.centroids.row(state.labels[i]));
  return s;
}

ClusterState kmeans(const Matrix& points, int num_clusters, uint64_t seed, int max_iters, double tol,
                    std::vector<double>* inertia_trace) {
  int n = points.rows;
  int d = points.cols;
  if (num_clusters < 1) throw ConfigError("num_clusters must be >= 1");
  if (num_clusters > n) throw ConfigError("num_clusters exceeds the number of points");

  Rng rng(derive_seed(seed, "kmeans"));
  ClusterState st;
  st.num_clusters = num_clusters;
  st.centroids = kmeanspp_seed(points, num_clusters, rng);
  st.labels.assign(n, 0);

  for (int iter = 0; iter < max_iters; ++iter) {
    for (int i = 0; i < n; ++i) st.labels[i] = nearest(st.centroids, points.row(i));

    Matrix sums(num_clusters, d);
    std::vector<int> counts(num_clusters, 0);
    for (int i = 0; i < n; ++i) {
      auto p = points.row(i);
      auto s = sums.row(st.labels[i]);
      for (int k = 0; k < d; ++k) s[k] += p[k];
      ++counts[st.labels[i]];
    }

    // Re-seed empty clusters with the point farthest from its own centroid.
    for (int c = 0; c < num_clusters; ++c) {
      if (counts[c] > 0) continue;
      int far = 0;
      double far_d = -1.0;
      for (int i = 0; i < n; ++i) {
        if (counts[st.labels[i]] <= 1) continue;  // keep donor clusters nonempty
        double dist = sq_dist(points.row(i), st.centroids.row(st.labels[i]));
        if (dist > far_d) {
          far_d = dist;
          far = i;
        }
      }
      int donor = st.labels[far];
      auto ds = sums.row(donor);
      auto p = points.row(far);
      for (int k = 0; k < d; ++k) ds[k] -= p[k];
      --counts[donor];
      st.labels[far] = c;
      sums.set_row(c, p);
      counts[c] = 1;
    }

    double shift = 0.0;
    for (int c = 0; c < num_clusters; ++c) {
      auto s = sums.row(c);
      auto ctr = st.centroids.row(c);
      double move = 0.0;
      for (int k = 0; k < d; ++k) {
        double mean = s[k] / counts[c];
        double diff = mean - ctr[k];
        move += diff * diff;
        ctr[k] = mean;
      }
      shift = std::max(shift, std::sqrt(move));
    }
    if (inertia_trace) inertia_trace->push_back(kmeans_inertia(points, st));
    if (shift < tol) break;
  }

  // Labels must match the final centroids.
  for (int i = 0; i < n; ++i) st.labels[i] = nearest(st.centroids, points.row(i));
  return st;
}

NeighborAssignment assign_neighbors(const ClusterState& state, const Matrix& embeddings, int k) {
  int n = state.num_points();
  if (embeddings.rows != n) throw ContractViolation("cluster labels do not cover the embedding table");

  NeighborAssignment out;
  out.top_k = k;
  out.neighbors.assign(n, {});

  std::vector<std::vector<int>> members(state.num_clusters);
  for (int i = 0; i < n; ++i) members[state.labels[i]].push_back(i);

  Vec norms(n);
  for (int i = 0; i < n; ++i) norms[i] = l2_norm(embeddings.row(i));

  for (const auto& cluster : members) {
    int m = static_cast<int>(cluster.size());
    if (m <= 1) continue;
    for (int a = 0; a < m; ++a) {
      int u = cluster[a];
      std::vector<std::pair<double, int>> ranked;  // (-similarity, id)
      ranked.reserve(m - 1);
      for (int b = 0; b < m; ++b) {
        if (b == a) continue;
        int v = cluster[b];
        double denom = norms[u] * norms[v];
        double sim = denom > 0 ? dot(embeddings.row(u), embeddings.row(v)) / denom : 0.0;
        ranked.emplace_back(-sim, v);
      }
      std::sort(ranked.begin(), ranked.end());
      int take = std::min<int>(k, m - 1);
      auto& list = out.neighbors[u];
      list.reserve(take);
      for (int t = 0; t < take; ++t) list.push_back(ranked[t].second);
    }
  }
  return out;
}

std::vector<int> proportional_sample(const ClusterState& state, int batch, uint64_t seed) {
  int n = state.num_points();
  if (batch > n) throw ConfigError("batch exceeds the number of users");
  if (batch < 0) throw ConfigError("batch must be nonnegative");

  auto sizes = state.cluster_sizes();
  int k = state.num_clusters;

  // Largest-remainder quotas: floor the exact shares, then hand the leftover
  // slots to the clusters with the biggest fractional parts.
  std::vector<int> quota(k, 0);
  std::vector<std::pair<double, int>> remainders;
  int assigned = 0;
  for (int c = 0; c < k; ++c) {
    double exact = static_cast<double>(batch) * sizes[c] / n;
    quota[c] = static_cast<int>(exact);
    assigned += quota[c];
    remainders.emplace_back(-(exact - quota[c]), c);
  }
  std::sort(remainders.begin(), remainders.end());
  for (int i = 0; i < batch - assigned; ++i) ++quota[remainders[i].second];

  std::vector<std::vector<int>> members(k);
  for (int i = 0; i < n; ++i) members[state.labels[i]].push_back(i);

  Rng rng(derive_seed(seed, "proportional_sample"));
  std::vector<int> picked;
  picked.reserve(batch);
  for (int c = 0; c < k; ++c) {
    auto& pool = members[c];  // already in ascending user id order
    for (int i = 0; i < quota[c]; ++i) {
      int j = i + static_cast<int>(rng.below(static_cast<uint64_t>(pool.size() - i)));
      std::swap(pool[i], pool[j]);
      picked.push_back(pool[i]);
    }
  }
  return picked;
}

std::vector<int> uniform_sample(int num_users, int batch, uint64_t seed) {
  if (batch > num_users) throw ConfigError("batch exceeds the number of users");
  if (batch < 0) throw ConfigError("batch must be nonnegative");
  Rng rng(derive_seed(seed, "uniform_sample"));
  return sample_without_replacement(num_users, batch, rng);
}

}  // namespace cfedgr
