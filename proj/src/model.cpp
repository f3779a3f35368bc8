#include "cfedgr/model.hpp"

#include <algorithm>
#include <cmath>

namespace cfedgr {

namespace {

double elu(double z) { return z > 0 ? z : std::expm1(z); }
double elu_grad(double z) { return z > 0 ? 1.0 : std::exp(z); }

double leaky_relu(double s, double slope) { return s > 0 ? s : slope * s; }
double leaky_relu_grad(double s, double slope) { return s > 0 ? 1.0 : slope; }

void check_layer_shapes(const GatLayerParams& p) {
  if (p.weight.rows <= 0 || p.weight.cols <= 0 || static_cast<int>(p.attn.size()) != 2 * p.weight.rows) {
    throw ContractViolation("GAT layer parameter shapes are inconsistent");
  }
}

// attn = [a_self | a_peer]; pair score for node i aggregating from j is
// LeakyReLU(a_self . g_i + a_peer . g_j).
double pair_score(const GatLayerParams& p, std::span<const double> g_i, std::span<const double> g_j) {
  int d = p.weight.rows;
  double s = 0.0;
  for (int k = 0; k < d; ++k) s += p.attn[k] * g_i[k] + p.attn[d + k] * g_j[k];
  return s;
}

void softmax_inplace(Vec& logits) {
  double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& x : logits) {
    x = std::exp(x - m);
    sum += x;
  }
  for (double& x : logits) x /= sum;
}

Matrix assemble_nodes(const LocalGraph& graph) {
  int d = static_cast<int>(graph.user_emb.size());
  int q = graph.num_items();
  int p = graph.num_neighbors();
  Matrix nodes(1 + q + p, d);
  nodes.set_row(0, graph.user_emb);
  for (int j = 0; j < q; ++j) nodes.set_row(1 + j, graph.item_embs.row(j));
  for (int j = 0; j < p; ++j) nodes.set_row(1 + q + j, graph.neighbor_embs.row(j));
  return nodes;
}

}  // namespace

InitState init_params(int num_users, int num_items, int d, uint64_t seed) {
  if (d < 1) throw ConfigError("embedding dimension must be >= 1");
  if (num_users < 1 || num_items < 1) throw ConfigError("need at least one user and one item");

  double s = 1.0 / std::sqrt(static_cast<double>(d));
  Rng rng(derive_seed(seed, "init"));
  auto fill = [&](std::span<double> v) {
    for (double& x : v) x = rng.uniform(-s, s);
  };

  InitState st;
  st.user_embeddings = Matrix(num_users, d);
  st.item_embeddings = Matrix(num_items, d);
  fill(st.user_embeddings.data);
  fill(st.item_embeddings.data);
  for (GatLayerParams* layer : {&st.model.layer1, &st.model.layer2}) {
    layer->weight = Matrix(d, d);
    layer->attn.assign(2 * d, 0.0);
    fill(layer->weight.data);
    fill(layer->attn);
    layer->leaky_slope = 0.2;
  }
  return st;
}

GatLayerCache gat_layer_forward(const GatLayerParams& params, const Matrix& nodes) {
  check_layer_shapes(params);
  if (nodes.cols != params.weight.cols || nodes.rows < 1) {
    throw ContractViolation("node matrix does not match layer input dimension");
  }
  if (!all_finite(nodes)) throw NumericError("non-finite input to GAT layer");

  int n = nodes.rows;
  int leaves = n - 1;
  int d_out = params.weight.rows;
  int d_in = params.weight.cols;

  GatLayerCache c;
  c.input = nodes;
  c.transformed = Matrix(n, d_out);
  for (int v = 0; v < n; ++v) {
    auto h = nodes.row(v);
    auto g = c.transformed.row(v);
    for (int r = 0; r < d_out; ++r) {
      double acc = 0.0;
      const double* w = params.weight.data.data() + static_cast<size_t>(r) * d_in;
      for (int k = 0; k < d_in; ++k) acc += w[k] * h[k];
      g[r] = acc;
    }
  }

  auto g0 = c.transformed.row(0);

  // Center aggregates over itself and every leaf.
  c.center_logits.resize(n);
  c.center_logits[0] = pair_score(params, g0, g0);
  for (int l = 0; l < leaves; ++l) c.center_logits[1 + l] = pair_score(params, g0, c.transformed.row(1 + l));
  c.center_alpha = c.center_logits;
  for (double& x : c.center_alpha) x = leaky_relu(x, params.leaky_slope);
  softmax_inplace(c.center_alpha);

  // Each leaf aggregates over itself and the center.
  c.leaf_logits = Matrix(leaves, 2);
  c.leaf_alpha = Matrix(leaves, 2);
  for (int l = 0; l < leaves; ++l) {
    auto gl = c.transformed.row(1 + l);
    c.leaf_logits(l, 0) = pair_score(params, gl, gl);
    c.leaf_logits(l, 1) = pair_score(params, gl, g0);
    Vec a{leaky_relu(c.leaf_logits(l, 0), params.leaky_slope),
          leaky_relu(c.leaf_logits(l, 1), params.leaky_slope)};
    softmax_inplace(a);
    c.leaf_alpha(l, 0) = a[0];
    c.leaf_alpha(l, 1) = a[1];
  }

  c.preact = Matrix(n, d_out);
  auto z0 = c.preact.row(0);
  for (int j = 0; j < n; ++j) {
    double a = c.center_alpha[j];
    auto gj = c.transformed.row(j);
    for (int k = 0; k < d_out; ++k) z0[k] += a * gj[k];
  }
  for (int l = 0; l < leaves; ++l) {
    auto zl = c.preact.row(1 + l);
    auto gl = c.transformed.row(1 + l);
    for (int k = 0; k < d_out; ++k) zl[k] = c.leaf_alpha(l, 0) * gl[k] + c.leaf_alpha(l, 1) * g0[k];
  }

  c.output = Matrix(n, d_out);
  for (int v = 0; v < n; ++v) {
    auto z = c.preact.row(v);
    auto o = c.output.row(v);
    for (int k = 0; k < d_out; ++k) o[k] = elu(z[k]);
  }
  return c;
}

GatLayerResult gat_layer_forward(const GatLayerParams& params, const Vec& center, const Matrix& leaves) {
  Matrix nodes(1 + leaves.rows, static_cast<int>(center.size()));
  nodes.set_row(0, center);
  for (int l = 0; l < leaves.rows; ++l) nodes.set_row(1 + l, leaves.row(l));
  GatLayerCache cache = gat_layer_forward(params, nodes);

  GatLayerResult res;
  auto c0 = cache.output.row(0);
  res.center_out.assign(c0.begin(), c0.end());
  res.leaves_out = Matrix(leaves.rows, cache.output.cols);
  for (int l = 0; l < leaves.rows; ++l) res.leaves_out.set_row(l, cache.output.row(1 + l));
  res.cache = std::move(cache);
  return res;
}

ForwardCache forward(const ModelParams& model, const LocalGraph& graph) {
  if (graph.num_items() < 1) throw ContractViolation("local graph needs at least one interacted item");
  if (static_cast<int>(graph.ratings.size()) != graph.num_items() ||
      static_cast<int>(graph.item_ids.size()) != graph.num_items()) {
    throw ContractViolation("item ids, embeddings and ratings must be aligned");
  }

  ForwardCache cache;
  cache.num_items = graph.num_items();
  cache.num_neighbors = graph.num_neighbors();
  cache.layer1 = gat_layer_forward(model.layer1, assemble_nodes(graph));
  cache.layer2 = gat_layer_forward(model.layer2, cache.layer1.output);
  return cache;
}

double predict(std::span<const double> user_vec, std::span<const double> item_vec) {
  return dot(user_vec, item_vec);
}

double loss(std::span<const double> predicted, std::span<const double> actual) {
  if (predicted.empty() || predicted.size() != actual.size()) {
    throw ContractViolation("loss needs aligned, nonempty prediction/rating lists");
  }
  double acc = 0.0;
  for (size_t i = 0; i < predicted.size(); ++i) {
    double d = actual[i] - predicted[i];
    acc += d * d;
  }
  return acc / static_cast<double>(predicted.size());
}

namespace {

// Backward through one layer. d_out is the loss gradient at the layer outputs;
// returns the gradient at the layer inputs and accumulates parameter grads.
Matrix gat_layer_backward(const GatLayerParams& params, const GatLayerCache& c, const Matrix& d_out,
                          GatLayerParams& grads) {
  int n = c.input.rows;
  int leaves = n - 1;
  int d_o = params.weight.rows;
  int d_i = params.weight.cols;

  // ELU backward.
  Matrix dz(n, d_o);
  for (int v = 0; v < n; ++v) {
    auto z = c.preact.row(v);
    auto dst = dz.row(v);
    auto src = d_out.row(v);
    for (int k = 0; k < d_o; ++k) dst[k] = src[k] * elu_grad(z[k]);
  }

  Matrix dg(n, d_o);  // gradient wrt transformed node features
  auto g0 = c.transformed.row(0);
  auto dz0 = dz.row(0);

  const double* a_self = params.attn.data();
  const double* a_peer = params.attn.data() + d_o;
  Vec da(2 * d_o, 0.0);
  double* da_self = da.data();
  double* da_peer = da.data() + d_o;

  // Center aggregation: z_0 = sum_j alpha_j g_j over j in {0..n-1}.
  {
    Vec dalpha(n, 0.0);
    for (int j = 0; j < n; ++j) {
      auto gj = c.transformed.row(j);
      dalpha[j] = dot(dz0, gj);
      auto dgj = dg.row(j);
      double a = c.center_alpha[j];
      for (int k = 0; k < d_o; ++k) dgj[k] += a * dz0[k];
    }
    // softmax backward
    double inner = 0.0;
    for (int j = 0; j < n; ++j) inner += c.center_alpha[j] * dalpha[j];
    for (int j = 0; j < n; ++j) {
      double de = c.center_alpha[j] * (dalpha[j] - inner);
      double ds = de * leaky_relu_grad(c.center_logits[j], params.leaky_slope);
      auto gj = c.transformed.row(j);
      auto dgj = dg.row(j);
      auto dg0 = dg.row(0);
      for (int k = 0; k < d_o; ++k) {
        da_self[k] += ds * g0[k];
        da_peer[k] += ds * gj[k];
        dg0[k] += ds * a_self[k];
        dgj[k] += ds * a_peer[k];
      }
    }
  }

  // Leaf aggregation: z_l = alpha_0 g_l + alpha_1 g_0.
  for (int l = 0; l < leaves; ++l) {
    auto gl = c.transformed.row(1 + l);
    auto dzl = dz.row(1 + l);
    double dalpha0 = dot(dzl, gl);
    double dalpha1 = dot(dzl, g0);
    double a0 = c.leaf_alpha(l, 0);
    double a1 = c.leaf_alpha(l, 1);
    auto dgl = dg.row(1 + l);
    auto dg0 = dg.row(0);
    for (int k = 0; k < d_o; ++k) {
      dgl[k] += a0 * dzl[k];
      dg0[k] += a1 * dzl[k];
    }
    double inner = a0 * dalpha0 + a1 * dalpha1;
    double de0 = a0 * (dalpha0 - inner);
    double de1 = a1 * (dalpha1 - inner);
    double ds0 = de0 * leaky_relu_grad(c.leaf_logits(l, 0), params.leaky_slope);
    double ds1 = de1 * leaky_relu_grad(c.leaf_logits(l, 1), params.leaky_slope);
    for (int k = 0; k < d_o; ++k) {
      // self pair (l <- l): both attention halves see g_l
      da_self[k] += (ds0 + ds1) * gl[k];
      da_peer[k] += ds0 * gl[k] + ds1 * g0[k];
      dgl[k] += ds0 * (a_self[k] + a_peer[k]) + ds1 * a_self[k];
      dg0[k] += ds1 * a_peer[k];
    }
  }

  // Transform backward: g_v = W h_v.
  Matrix d_in(n, d_i);
  for (int v = 0; v < n; ++v) {
    auto h = c.input.row(v);
    auto dgv = dg.row(v);
    auto dh = d_in.row(v);
    for (int r = 0; r < d_o; ++r) {
      double* wrow = grads.weight.data.data() + static_cast<size_t>(r) * d_i;
      const double* prow = params.weight.data.data() + static_cast<size_t>(r) * d_i;
      double g = dgv[r];
      for (int k = 0; k < d_i; ++k) {
        wrow[k] += g * h[k];
        dh[k] += prow[k] * g;
      }
    }
  }

  for (int k = 0; k < 2 * d_o; ++k) grads.attn[k] += da[k];
  return d_in;
}

}  // namespace

LocalGradients backward(const ModelParams& model, const LocalGraph& graph, const ForwardCache& cache) {
  int q = graph.num_items();
  int p = graph.num_neighbors();
  int d = static_cast<int>(graph.user_emb.size());
  if (cache.num_items != q || cache.num_neighbors != p || cache.layer1.input.rows != 1 + q + p ||
      cache.layer1.input.cols != d) {
    throw ContractViolation("forward cache does not match the given graph");
  }

  // Loss gradient at the refined embeddings.
  auto u = cache.layer2.output.row(0);
  Matrix d_out2(cache.layer2.output.rows, cache.layer2.output.cols);
  auto du = d_out2.row(0);
  for (int j = 0; j < q; ++j) {
    auto v = cache.layer2.output.row(1 + j);
    double r_hat = dot(u, v);
    double coeff = 2.0 * (r_hat - graph.ratings[j]) / static_cast<double>(q);
    auto dv = d_out2.row(1 + j);
    for (int k = 0; k < d; ++k) {
      du[k] += coeff * v[k];
      dv[k] += coeff * u[k];
    }
  }

  LocalGradients grads;
  grads.item_ids = graph.item_ids;
  for (auto [dst, src] : {std::pair{&grads.theta.layer1, &model.layer1},
                          std::pair{&grads.theta.layer2, &model.layer2}}) {
    dst->weight = Matrix(src->weight.rows, src->weight.cols);
    dst->attn.assign(src->attn.size(), 0.0);
    dst->leaky_slope = src->leaky_slope;
  }

  Matrix d_mid = gat_layer_backward(model.layer2, cache.layer2, d_out2, grads.theta.layer2);
  Matrix d_in = gat_layer_backward(model.layer1, cache.layer1, d_mid, grads.theta.layer1);

  auto du0 = d_in.row(0);
  grads.user.assign(du0.begin(), du0.end());
  grads.items = Matrix(q, d);
  for (int j = 0; j < q; ++j) grads.items.set_row(j, d_in.row(1 + j));
  // neighbor rows of d_in are dropped: neighbor embeddings stay constant
  return grads;
}

}  // namespace cfedgr
