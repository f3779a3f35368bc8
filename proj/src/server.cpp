#include "cfedgr/server.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace cfedgr {

namespace {

void axpy(double a, std::span<const double> x, std::span<double> y) {
  for (size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

void check_same_shape(const ModelParams& a, const ModelParams& b) {
  auto same = [](const GatLayerParams& x, const GatLayerParams& y) {
    return x.weight.rows == y.weight.rows && x.weight.cols == y.weight.cols && x.attn.size() == y.attn.size();
  };
  if (!same(a.layer1, b.layer1) || !same(a.layer2, b.layer2)) {
    throw ContractViolation("client updates disagree on model parameter shapes");
  }
}

}  // namespace

AggregatedGradients aggregate(const std::vector<ClientUpdate>& updates) {
  if (updates.empty()) throw ContractViolation("cannot aggregate an empty update list");

  // Canonical participant order: ascending user id.
  std::vector<const ClientUpdate*> ordered;
  ordered.reserve(updates.size());
  for (const auto& u : updates) ordered.push_back(&u);
  std::sort(ordered.begin(), ordered.end(),
            [](const ClientUpdate* a, const ClientUpdate* b) { return a->user_id < b->user_id; });

  long long n = 0;
  for (const auto* u : ordered) {
    if (u->weight < 1) throw ContractViolation("client update weight must be >= 1");
    n += u->weight;
  }

  int d = static_cast<int>(ordered.front()->grad_user.size());
  const ModelParams& shape = ordered.front()->grad_theta;

  AggregatedGradients agg;
  agg.total_weight = n;
  agg.theta.layer1.weight = Matrix(shape.layer1.weight.rows, shape.layer1.weight.cols);
  agg.theta.layer1.attn.assign(shape.layer1.attn.size(), 0.0);
  agg.theta.layer1.leaky_slope = shape.layer1.leaky_slope;
  agg.theta.layer2.weight = Matrix(shape.layer2.weight.rows, shape.layer2.weight.cols);
  agg.theta.layer2.attn.assign(shape.layer2.attn.size(), 0.0);
  agg.theta.layer2.leaky_slope = shape.layer2.leaky_slope;

  std::map<int, Vec> user_acc;
  std::map<int, Vec> item_acc;
  for (const auto* u : ordered) {
    check_same_shape(u->grad_theta, shape);
    if (static_cast<int>(u->grad_user.size()) != d || u->item_grads.rows.cols != d) {
      throw ContractViolation("client updates disagree on embedding dimension");
    }
    double w = static_cast<double>(u->weight) / static_cast<double>(n);

    axpy(w, u->grad_theta.layer1.weight.data, agg.theta.layer1.weight.data);
    axpy(w, u->grad_theta.layer1.attn, agg.theta.layer1.attn);
    axpy(w, u->grad_theta.layer2.weight.data, agg.theta.layer2.weight.data);
    axpy(w, u->grad_theta.layer2.attn, agg.theta.layer2.attn);

    auto [uit, _] = user_acc.try_emplace(u->user_id, Vec(d, 0.0));
    axpy(w, u->grad_user, uit->second);

    for (int r = 0; r < u->item_grads.rows.rows; ++r) {
      auto [it, inserted] = item_acc.try_emplace(u->item_grads.item_ids[r], Vec(d, 0.0));
      axpy(w, u->item_grads.rows.row(r), it->second);
    }
  }
  for (auto& [uid, row] : user_acc) agg.user_rows.emplace_back(uid, std::move(row));

  agg.item_ids.reserve(item_acc.size());
  agg.item_rows = Matrix(static_cast<int>(item_acc.size()), d);
  int r = 0;
  for (auto& [id, row] : item_acc) {
    agg.item_ids.push_back(id);
    agg.item_rows.set_row(r++, row);
  }
  return agg;
}

void apply_updates(ModelParams& model, EmbeddingTable& user_table, EmbeddingTable& item_table,
                   const AggregatedGradients& agg, double lr, double weight_decay) {
  check_same_shape(model, agg.theta);
  if (user_table.cols != item_table.cols ||
      (!agg.user_rows.empty() && static_cast<int>(agg.user_rows.front().second.size()) != user_table.cols)) {
    throw ContractViolation("aggregate dimension does not match the embedding tables");
  }

  double shrink = 1.0 - lr * weight_decay;
  auto step = [&](std::span<double> param, std::span<const double> grad) {
    for (size_t i = 0; i < param.size(); ++i) param[i] = shrink * param[i] - lr * grad[i];
  };

  step(model.layer1.weight.data, agg.theta.layer1.weight.data);
  step(model.layer1.attn, agg.theta.layer1.attn);
  step(model.layer2.weight.data, agg.theta.layer2.weight.data);
  step(model.layer2.attn, agg.theta.layer2.attn);

  for (const auto& [uid, grad] : agg.user_rows) {
    if (uid < 0 || uid >= user_table.rows) throw ContractViolation("user id outside the embedding table");
    step(user_table.row(uid), grad);
  }
  for (size_t i = 0; i < agg.item_ids.size(); ++i) {
    int iid = agg.item_ids[i];
    if (iid < 0 || iid >= item_table.rows) throw ContractViolation("item id outside the embedding table");
    step(item_table.row(iid), agg.item_rows.row(static_cast<int>(i)));
  }
}

}  // namespace cfedgr
