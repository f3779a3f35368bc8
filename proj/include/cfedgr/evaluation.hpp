#pragma once

#include <vector>

#include "cfedgr/clustering.hpp"
#include "cfedgr/dataset.hpp"
#include "cfedgr/model.hpp"

namespace cfedgr {

struct MetricReport {
  double mae = 0.0;
  double rmse = 0.0;
  long long num_pairs = 0;
  double clamped_fraction = 0.0;
  long long skipped_users = 0;  // held-out users without a training shard
};

// Scores held-out (user, item, rating) triples against the current global
// state. Each user's local graph is built from its training items plus the
// given neighbor assignment; held-out items use their refined embedding when
// they appear in the graph and their raw table row otherwise. Predictions
// are clamped to the rating range.
MetricReport evaluate(const ModelParams& model, const EmbeddingTable& user_table,
                      const EmbeddingTable& item_table, const std::vector<UserShard>& shards,
                      const std::vector<RatingTriple>& heldout, const NeighborAssignment* neighbors,
                      double min_rating, double max_rating);

}  // namespace cfedgr
