#include "cfedgr/federation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <thread>

#include "cfedgr/serialize.hpp"

namespace cfedgr {

ClientRoundResult client_round(const UserShard& shard, const ModelParams& model, const Vec& user_emb,
                               const Matrix& neighbor_embs, const EmbeddingTable& item_table,
                               const PrivacyConfig& privacy, uint64_t seed) {
  if (shard.items.empty()) throw ContractViolation("client has no training interactions");

  int d = static_cast<int>(user_emb.size());
  int q = static_cast<int>(shard.items.size());

  LocalGraph graph;
  graph.user_emb = user_emb;
  graph.item_ids = shard.items;
  graph.ratings = shard.ratings;
  graph.item_embs = Matrix(q, d);
  for (int j = 0; j < q; ++j) graph.item_embs.set_row(j, item_table.row(shard.items[j]));
  graph.neighbor_embs = neighbor_embs;

  ForwardCache cache = forward(model, graph);
  auto u = refined_user(cache);
  Vec predictions(q);
  for (int j = 0; j < q; ++j) predictions[j] = predict(u, refined_item(cache, j));

  ClientRoundResult res;
  res.train_loss = loss(predictions, graph.ratings);
  LocalGradients grads = backward(model, graph, cache);
  res.update = privatize_update(shard.user_id, grads, item_table.rows, privacy, seed);
  return res;
}

namespace {

struct GlobalState {
  ModelParams model;
  EmbeddingTable user_table;
  EmbeddingTable item_table;
};

void check_finite_state(const GlobalState& st, int round) {
  if (!all_finite(st.user_table) || !all_finite(st.item_table) || !all_finite(st.model.layer1.weight) ||
      !all_finite(std::span<const double>(st.model.layer1.attn)) || !all_finite(st.model.layer2.weight) ||
      !all_finite(std::span<const double>(st.model.layer2.attn))) {
    throw NumericError("non-finite global state after round " + std::to_string(round) +
                       "; lower the learning rate or noise scale");
  }
}

Matrix gather_rows(const EmbeddingTable& table, const std::vector<int>& ids) {
  Matrix out(static_cast<int>(ids.size()), table.cols);
  for (size_t i = 0; i < ids.size(); ++i) out.set_row(static_cast<int>(i), table.row(ids[i]));
  return out;
}

// Runs fn(i) for i in [0, n) on `threads` workers. Outputs are written to
// per-index slots, so the schedule does not affect results.
void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  int workers = std::min(threads, n);
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace

RunResult run(const Dataset& dataset, const SplitDataset& split, const std::vector<UserShard>& shards,
              const FederationConfig& fed, const PrivacyConfig& privacy, int embedding_dim) {
  if (fed.users_per_round < 1 || fed.users_per_round > dataset.num_users) {
    throw ConfigError("users_per_round must be in [1, num_users]");
  }
  if (fed.pretrain_rounds >= fed.total_rounds) {
    throw ConfigError("pretrain_rounds must be smaller than total_rounds");
  }
  if (fed.learning_rate <= 0) throw ConfigError("learning_rate must be > 0");

  int threads = fed.threads > 0 ? fed.threads : static_cast<int>(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;

  GlobalState st;
  {
    InitState init = init_params(dataset.num_users, dataset.num_items, embedding_dim, fed.seed);
    st.model = std::move(init.model);
    st.user_table = std::move(init.user_embeddings);
    st.item_table = std::move(init.item_embeddings);
  }

  ClusterState clusters;
  NeighborAssignment assignment;
  bool clustered = false;

  auto recluster = [&](int round) {
    clusters = kmeans(st.user_table, fed.num_clusters, derive_seed(fed.seed, "recluster", round));
    clusters.created_at_round = round;
    if (fed.use_neighbors) {
      assignment = assign_neighbors(clusters, st.user_table, fed.top_k);
    } else {
      assignment = NeighborAssignment{fed.top_k, std::vector<std::vector<int>>(dataset.num_users)};
    }
    clustered = true;
  };

  if (fed.pretrain_rounds == 0) recluster(0);

  RunResult result;
  result.best_val_rmse = std::numeric_limits<double>::infinity();
  long long clustered_neighbor_ids = 0;
  long long clustered_participants = 0;

  for (int round = 1; round <= fed.total_rounds; ++round) {
    bool augmented = clustered;  // true from the first post-pretraining round on
    std::vector<int> participants =
        augmented ? proportional_sample(clusters, fed.users_per_round, derive_seed(fed.seed, "round", round))
                  : uniform_sample(dataset.num_users, fed.users_per_round, derive_seed(fed.seed, "round", round));

    RoundReport rep;
    rep.round = round;
    rep.participants = static_cast<int>(participants.size());

    std::vector<ClientRoundResult> results(participants.size());
    std::vector<long long> uplink(participants.size(), 0);
    std::vector<long long> downlink(participants.size(), 0);
    std::vector<long long> ids_sent(participants.size(), 0);

    parallel_for(static_cast<int>(participants.size()), threads, [&](int i) {
      int uid = participants[i];
      const UserShard& shard = shards[uid];
      static const std::vector<int> kNoNeighbors;
      const std::vector<int>& nb = augmented && uid < static_cast<int>(assignment.neighbors.size())
                                       ? assignment.neighbors[uid]
                                       : kNoNeighbors;
      Matrix nb_rows = gather_rows(st.user_table, nb);
      auto ur = st.user_table.row(uid);
      Vec user_emb(ur.begin(), ur.end());

      downlink[i] = static_cast<long long>(
          broadcast_wire_size(embedding_dim, static_cast<int>(nb.size()), dataset.num_items));
      ids_sent[i] = static_cast<long long>(nb.size());

      results[i] = client_round(shard, st.model, user_emb, nb_rows, st.item_table, privacy,
                                derive_seed(fed.seed, "client", round, static_cast<uint64_t>(uid)));
      uplink[i] = static_cast<long long>(client_update_wire_size(results[i].update));
    });

    std::vector<ClientUpdate> updates;
    updates.reserve(results.size());
    double loss_sum = 0.0;
    for (size_t i = 0; i < results.size(); ++i) {
      loss_sum += results[i].train_loss;
      rep.uplink_bytes += uplink[i];
      rep.downlink_bytes += downlink[i];
      rep.neighbor_ids_sent += ids_sent[i];
      updates.push_back(std::move(results[i].update));
    }
    rep.train_loss = loss_sum / static_cast<double>(results.size());

    AggregatedGradients agg = aggregate(updates);
    apply_updates(st.model, st.user_table, st.item_table, agg, fed.learning_rate, fed.weight_decay);
    check_finite_state(st, round);

    if (augmented) {
      clustered_neighbor_ids += rep.neighbor_ids_sent;
      clustered_participants += rep.participants;
    }

    if (round == fed.pretrain_rounds ||
        (clustered && fed.recluster_every > 0 && (round - fed.pretrain_rounds) % fed.recluster_every == 0)) {
      recluster(round);
    }

    if (round % fed.eval_every == 0 || round == fed.total_rounds) {
      MetricReport val = evaluate(st.model, st.user_table, st.item_table, shards, split.validation,
                                  &assignment, dataset.min_rating, dataset.max_rating);
      rep.evaluated = true;
      rep.val_mae = val.mae;
      rep.val_rmse = val.rmse;
      rep.val_pairs = val.num_pairs;
      rep.val_clamped_fraction = val.clamped_fraction;
      if (val.num_pairs > 0 && val.rmse < result.best_val_rmse) {
        result.best_val_rmse = val.rmse;
        result.best_round = round;
        result.best_model = st.model;
        result.best_user_table = st.user_table;
        result.best_item_table = st.item_table;
        result.best_neighbors = assignment;
      }
    }

    result.total_uplink_bytes += rep.uplink_bytes;
    result.total_downlink_bytes += rep.downlink_bytes;
    result.total_neighbor_ids_sent += rep.neighbor_ids_sent;
    result.rounds.push_back(rep);
  }

  if (!std::isfinite(result.best_val_rmse)) {
    // No validation data: fall back to the final state.
    result.best_round = fed.total_rounds;
    result.best_model = st.model;
    result.best_user_table = st.user_table;
    result.best_item_table = st.item_table;
    result.best_neighbors = assignment;
    result.best_val_rmse = 0.0;
  }

  result.final_clusters = clusters;
  result.mean_neighbors_per_user = clustered_participants > 0
                                       ? static_cast<double>(clustered_neighbor_ids) /
                                             static_cast<double>(clustered_participants)
                                       : 0.0;
  result.test_metrics = evaluate(result.best_model, result.best_user_table, result.best_item_table, shards,
                                 split.test, &result.best_neighbors, dataset.min_rating, dataset.max_rating);
  return result;
}

std::string round_csv_header() {
  return "round,participants,train_loss,val_mae,val_rmse,uplink_bytes,downlink_bytes,neighbor_ids_sent";
}

std::string round_csv_row(const RoundReport& r) {
  char buf[256];
  if (r.evaluated) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.10g,%.10g,%.10g,%lld,%lld,%lld", r.round, r.participants,
                  r.train_loss, r.val_mae, r.val_rmse, r.uplink_bytes, r.downlink_bytes,
                  r.neighbor_ids_sent);
  } else {
    std::snprintf(buf, sizeof buf, "%d,%d,%.10g,,,%lld,%lld,%lld", r.round, r.participants, r.train_loss,
                  r.uplink_bytes, r.downlink_bytes, r.neighbor_ids_sent);
  }
  return buf;
}

}  // namespace cfedgr
