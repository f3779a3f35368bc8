#pragma once

#include <vector>

#include "cfedgr/common.hpp"

namespace cfedgr {

struct ClusterState {
  int num_clusters = 0;
  Matrix centroids;          // num_clusters x d
  std::vector<int> labels;   // one per user
  int created_at_round = -1;

  int num_points() const { return static_cast<int>(labels.size()); }
  std::vector<int> cluster_sizes() const;
};

// Up to k co-cluster user ids per user, ordered by descending cosine
// similarity, ties broken by ascending user id.
struct NeighborAssignment {
  int top_k = 0;
  std::vector<std::vector<int>> neighbors;  // indexed by user id
};

// Lloyd's algorithm with k-means++ seeding. Stops when the largest centroid
// shift drops below tol or after max_iters. Empty clusters are re-seeded with
// the point farthest from its assigned centroid.
ClusterState kmeans(const Matrix& points, int num_clusters, uint64_t seed, int max_iters = 100,
                    double tol = 1e-6, std::vector<double>* inertia_trace = nullptr);

double kmeans_inertia(const Matrix& points, const ClusterState& state);

NeighborAssignment assign_neighbors(const ClusterState& state, const Matrix& embeddings, int k);

// Per-cluster quotas proportional to cluster size (largest-remainder rounding,
// quotas sum exactly to batch), then uniform without replacement inside each
// cluster.
std::vector<int> proportional_sample(const ClusterState& state, int batch, uint64_t seed);

std::vector<int> uniform_sample(int num_users, int batch, uint64_t seed);

}  // namespace cfedgr
