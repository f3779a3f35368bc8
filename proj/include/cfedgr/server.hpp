#pragma once

// Server-side aggregation. This header deliberately depends only on uploaded
// updates and embedding tables: no shard or raw-interaction types appear here,
// so server code cannot read client-private data.

#include <vector>

#include "cfedgr/common.hpp"
#include "cfedgr/model.hpp"
#include "cfedgr/privacy.hpp"

namespace cfedgr {

struct AggregatedGradients {
  ModelParams theta;
  std::vector<std::pair<int, Vec>> user_rows;  // sorted by user id
  std::vector<int> item_ids;                   // sorted
  Matrix item_rows;
  long long total_weight = 0;                  // n = sum of participant weights
};

// Weighted sum with weights n_k / n over this round's participants.
// Summation order is canonicalized by user id so the result is independent
// of the participant list order.
AggregatedGradients aggregate(const std::vector<ClientUpdate>& updates);

// theta' = (1 - lr*wd) theta - lr * grad; embedding rows are updated the same
// way but only where the aggregate has mass.
void apply_updates(ModelParams& model, EmbeddingTable& user_table, EmbeddingTable& item_table,
                   const AggregatedGradients& agg, double lr, double weight_decay);

}  // namespace cfedgr
