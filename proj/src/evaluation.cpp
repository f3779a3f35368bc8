#include "cfedgr/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace cfedgr {

namespace {

LocalGraph build_graph(const UserShard& shard, const EmbeddingTable& user_table,
                       const EmbeddingTable& item_table, const std::vector<int>* neighbor_ids) {
  int d = user_table.cols;
  int q = static_cast<int>(shard.items.size());

  LocalGraph g;
  auto ur = user_table.row(shard.user_id);
  g.user_emb.assign(ur.begin(), ur.end());
  g.item_ids = shard.items;
  g.ratings = shard.ratings;
  g.item_embs = Matrix(q, d);
  for (int j = 0; j < q; ++j) g.item_embs.set_row(j, item_table.row(shard.items[j]));

  int p = neighbor_ids ? static_cast<int>(neighbor_ids->size()) : 0;
  g.neighbor_embs = Matrix(p, d);
  for (int j = 0; j < p; ++j) g.neighbor_embs.set_row(j, user_table.row((*neighbor_ids)[j]));
  return g;
}

}  // namespace

MetricReport evaluate(const ModelParams& model, const EmbeddingTable& user_table,
                      const EmbeddingTable& item_table, const std::vector<UserShard>& shards,
                      const std::vector<RatingTriple>& heldout, const NeighborAssignment* neighbors,
                      double min_rating, double max_rating) {
  std::unordered_map<int, std::vector<const RatingTriple*>> by_user;
  for (const auto& t : heldout) by_user[t.user_id].push_back(&t);

  MetricReport rep;
  double abs_sum = 0.0, sq_sum = 0.0;
  long long clamped = 0;

  for (const auto& [uid, triples] : by_user) {
    if (uid < 0 || uid >= static_cast<int>(shards.size()) || shards[uid].items.empty()) {
      ++rep.skipped_users;
      continue;
    }
    const UserShard& shard = shards[uid];
    const std::vector<int>* nb = nullptr;
    if (neighbors && uid < static_cast<int>(neighbors->neighbors.size()) &&
        !neighbors->neighbors[uid].empty()) {
      nb = &neighbors->neighbors[uid];
    }

    LocalGraph graph = build_graph(shard, user_table, item_table, nb);
    ForwardCache cache = forward(model, graph);
    auto u = refined_user(cache);

    std::unordered_map<int, int> in_graph;  // item id -> leaf index
    for (size_t j = 0; j < shard.items.size(); ++j) in_graph.emplace(shard.items[j], static_cast<int>(j));

    for (const RatingTriple* t : triples) {
      double r_hat;
      auto it = in_graph.find(t->item_id);
      if (it != in_graph.end()) {
        r_hat = predict(u, refined_item(cache, it->second));
      } else {
        r_hat = predict(u, item_table.row(t->item_id));
      }
      double clamped_hat = std::clamp(r_hat, min_rating, max_rating);
      if (clamped_hat != r_hat) ++clamped;
      double err = t->rating - clamped_hat;
      abs_sum += std::abs(err);
      sq_sum += err * err;
      ++rep.num_pairs;
    }
  }

  if (rep.num_pairs > 0) {
    rep.mae = abs_sum / static_cast<double>(rep.num_pairs);
    rep.rmse = std::sqrt(sq_sum / static_cast<double>(rep.num_pairs));
    rep.clamped_fraction = static_cast<double>(clamped) / static_cast<double>(rep.num_pairs);
  }
  return rep;
}

}  // namespace cfedgr
