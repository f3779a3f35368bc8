#pragma once

#include <vector>

#include "cfedgr/clustering.hpp"
#include "cfedgr/dataset.hpp"
#include "cfedgr/evaluation.hpp"
#include "cfedgr/model.hpp"
#include "cfedgr/privacy.hpp"
#include "cfedgr/server.hpp"

namespace cfedgr {

struct FederationConfig {
  double learning_rate = 0.05;
  double weight_decay = 0.0005;
  int users_per_round = 256;
  int pretrain_rounds = 5;   // T: rounds without neighbor augmentation
  int total_rounds = 200;
  int eval_every = 5;
  int recluster_every = 10;  // 0 disables refresh after the initial clustering
  int num_clusters = 10;
  int top_k = 200;
  bool use_neighbors = true;
  int threads = 0;           // 0 = hardware concurrency
  uint64_t seed = 42;
};

struct RoundReport {
  int round = 0;
  int participants = 0;
  double train_loss = 0.0;
  bool evaluated = false;
  double val_mae = 0.0;
  double val_rmse = 0.0;
  long long val_pairs = 0;
  double val_clamped_fraction = 0.0;
  long long uplink_bytes = 0;
  long long downlink_bytes = 0;
  long long neighbor_ids_sent = 0;
};

struct ClientRoundResult {
  ClientUpdate update;
  double train_loss = 0.0;
};

// One client step: build the local graph, forward, loss over all interacted
// items, backward, privatize. neighbor_embs rows align with shard.neighbor_ids.
ClientRoundResult client_round(const UserShard& shard, const ModelParams& model, const Vec& user_emb,
                               const Matrix& neighbor_embs, const EmbeddingTable& item_table,
                               const PrivacyConfig& privacy, uint64_t seed);

struct RunResult {
  std::vector<RoundReport> rounds;

  // State at the best validation RMSE.
  ModelParams best_model;
  EmbeddingTable best_user_table;
  EmbeddingTable best_item_table;
  NeighborAssignment best_neighbors;
  int best_round = 0;
  double best_val_rmse = 0.0;

  MetricReport test_metrics;
  ClusterState final_clusters;

  long long total_uplink_bytes = 0;
  long long total_downlink_bytes = 0;
  long long total_neighbor_ids_sent = 0;
  double mean_neighbors_per_user = 0.0;  // over clustered rounds
};

// Full federated training loop: uniform sampling and bare graphs for the
// pretraining rounds, then clustering, neighbor assignment, and
// cluster-proportional sampling, with periodic reclustering and validation.
RunResult run(const Dataset& dataset, const SplitDataset& split, const std::vector<UserShard>& shards,
              const FederationConfig& fed, const PrivacyConfig& privacy, int embedding_dim);

std::string round_csv_header();
std::string round_csv_row(const RoundReport& r);

}  // namespace cfedgr
