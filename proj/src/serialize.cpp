#include "cfedgr/serialize.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace cfedgr {

namespace {

constexpr char kUpdateMagic[4] = {'C', 'F', 'U', 'P'};
constexpr char kBroadcastMagic[4] = {'C', 'F', 'B', 'C'};
constexpr char kCheckpointMagic[4] = {'C', 'F', 'C', 'K'};
constexpr uint32_t kFormatVersion = 1;

class Writer {
public:
  void magic(const char m[4]) { buf_.append(m, 4); }
  void u32(uint32_t v) { raw(&v, sizeof v); }
  void i32(int32_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void doubles(std::span<const double> v) { raw(v.data(), v.size() * sizeof(double)); }
  void ints(std::span<const int> v) { raw(v.data(), v.size() * sizeof(int)); }
  std::string take() { return std::move(buf_); }

private:
  void raw(const void* p, size_t n) { buf_.append(static_cast<const char*>(p), n); }
  std::string buf_;
};

class Reader {
public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  void expect_magic(const char m[4], const char* what) {
    if (pos_ + 4 > bytes_.size() || std::memcmp(bytes_.data() + pos_, m, 4) != 0) {
      throw ParseError(std::string("bad magic for ") + what);
    }
    pos_ += 4;
  }
  uint32_t u32() {
    uint32_t v;
    raw(&v, sizeof v);
    return v;
  }
  int32_t i32() {
    int32_t v;
    raw(&v, sizeof v);
    return v;
  }
  double f64() {
    double v;
    raw(&v, sizeof v);
    return v;
  }
  void doubles(std::span<double> v) { raw(v.data(), v.size() * sizeof(double)); }
  void ints(std::span<int> v) { raw(v.data(), v.size() * sizeof(int)); }
  void done() {
    if (pos_ != bytes_.size()) throw ParseError("trailing bytes in serialized document");
  }

private:
  void raw(void* p, size_t n) {
    if (pos_ + n > bytes_.size()) throw ParseError("truncated serialized document");
    std::memcpy(p, bytes_.data() + pos_, n);
    pos_ += n;
  }
  const std::string& bytes_;
  size_t pos_ = 0;
};

void write_layer(Writer& w, const GatLayerParams& layer) {
  w.i32(layer.weight.rows);
  w.i32(layer.weight.cols);
  w.f64(layer.leaky_slope);
  w.doubles(layer.weight.data);
  w.doubles(layer.attn);
}

GatLayerParams read_layer(Reader& r) {
  GatLayerParams layer;
  int rows = r.i32();
  int cols = r.i32();
  if (rows < 0 || cols < 0) throw ParseError("negative layer shape");
  layer.leaky_slope = r.f64();
  layer.weight = Matrix(rows, cols);
  r.doubles(layer.weight.data);
  layer.attn.assign(2 * static_cast<size_t>(rows), 0.0);
  r.doubles(layer.attn);
  return layer;
}

size_t layer_wire_size(const GatLayerParams& layer) {
  return 2 * sizeof(int32_t) + sizeof(double) +
         (layer.weight.data.size() + layer.attn.size()) * sizeof(double);
}

}  // namespace

std::string encode_client_update(const ClientUpdate& update) {
  Writer w;
  w.magic(kUpdateMagic);
  w.u32(kFormatVersion);
  w.i32(update.user_id);
  w.i32(update.weight);
  write_layer(w, update.grad_theta.layer1);
  write_layer(w, update.grad_theta.layer2);
  w.i32(static_cast<int32_t>(update.grad_user.size()));
  w.doubles(update.grad_user);
  w.i32(static_cast<int32_t>(update.item_grads.item_ids.size()));
  w.i32(update.item_grads.rows.cols);
  w.ints(update.item_grads.item_ids);
  w.doubles(update.item_grads.rows.data);
  return w.take();
}

ClientUpdate decode_client_update(const std::string& bytes) {
  Reader r(bytes);
  r.expect_magic(kUpdateMagic, "client update");
  if (r.u32() != kFormatVersion) throw ParseError("unsupported client update version");

  ClientUpdate up;
  up.user_id = r.i32();
  up.weight = r.i32();
  up.grad_theta.layer1 = read_layer(r);
  up.grad_theta.layer2 = read_layer(r);
  int d_user = r.i32();
  up.grad_user.assign(d_user, 0.0);
  r.doubles(up.grad_user);
  int n_rows = r.i32();
  int d = r.i32();
  if (n_rows < 0 || d < 0) throw ParseError("negative item gradient shape");
  up.item_grads.item_ids.assign(n_rows, 0);
  r.ints(up.item_grads.item_ids);
  up.item_grads.rows = Matrix(n_rows, d);
  r.doubles(up.item_grads.rows.data);
  r.done();
  // The wire format carries no real/pseudo distinction.
  up.item_grads.is_pseudo.clear();
  return up;
}

size_t client_update_wire_size(const ClientUpdate& update) {
  return 4 + sizeof(uint32_t) + 2 * sizeof(int32_t) + layer_wire_size(update.grad_theta.layer1) +
         layer_wire_size(update.grad_theta.layer2) + sizeof(int32_t) +
         update.grad_user.size() * sizeof(double) + 2 * sizeof(int32_t) +
         update.item_grads.item_ids.size() * sizeof(int) + update.item_grads.rows.data.size() * sizeof(double);
}

std::string encode_broadcast(const ModelParams& model, int user_id, std::span<const double> user_row,
                             const std::vector<int>& neighbor_ids, const Matrix& neighbor_rows,
                             const EmbeddingTable& item_table) {
  Writer w;
  w.magic(kBroadcastMagic);
  w.u32(kFormatVersion);
  w.i32(user_id);
  write_layer(w, model.layer1);
  write_layer(w, model.layer2);
  w.i32(static_cast<int32_t>(user_row.size()));
  w.doubles(user_row);
  w.i32(static_cast<int32_t>(neighbor_ids.size()));
  w.ints(neighbor_ids);
  w.doubles(neighbor_rows.data);
  w.i32(item_table.rows);
  w.i32(item_table.cols);
  w.doubles(item_table.data);
  return w.take();
}

size_t broadcast_wire_size(int d, int num_neighbors, int num_items) {
  size_t layer = 2 * sizeof(int32_t) + sizeof(double) +
                 (static_cast<size_t>(d) * d + 2 * static_cast<size_t>(d)) * sizeof(double);
  return 4 + sizeof(uint32_t) + sizeof(int32_t) + 2 * layer + sizeof(int32_t) +
         static_cast<size_t>(d) * sizeof(double) + sizeof(int32_t) +
         static_cast<size_t>(num_neighbors) * sizeof(int) +
         static_cast<size_t>(num_neighbors) * d * sizeof(double) + 2 * sizeof(int32_t) +
         static_cast<size_t>(num_items) * d * sizeof(double);
}

void save_checkpoint(const std::string& path, const ModelParams& model, const EmbeddingTable& user_table,
                     const EmbeddingTable& item_table) {
  Writer w;
  w.magic(kCheckpointMagic);
  w.u32(kFormatVersion);
  w.i32(user_table.cols);
  write_layer(w, model.layer1);
  write_layer(w, model.layer2);
  w.i32(user_table.rows);
  w.doubles(user_table.data);
  w.i32(item_table.rows);
  w.doubles(item_table.data);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write checkpoint: " + path);
  std::string bytes = w.take();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  Reader r(bytes);
  r.expect_magic(kCheckpointMagic, "checkpoint");
  if (r.u32() != kFormatVersion) throw ParseError("unsupported checkpoint version");

  Checkpoint ck;
  int d = r.i32();
  ck.model.layer1 = read_layer(r);
  ck.model.layer2 = read_layer(r);
  int m = r.i32();
  ck.user_table = Matrix(m, d);
  r.doubles(ck.user_table.data);
  int n = r.i32();
  ck.item_table = Matrix(n, d);
  r.doubles(ck.item_table.data);
  r.done();
  return ck;
}

std::string cluster_state_json(const ClusterState& state) {
  nlohmann::json j;
  j["num_clusters"] = state.num_clusters;
  j["created_at_round"] = state.created_at_round;
  j["labels"] = state.labels;
  j["sizes"] = state.cluster_sizes();
  j["centroid_dim"] = state.centroids.cols;
  return j.dump(2);
}

std::string neighbor_assignment_json(const NeighborAssignment& assignment) {
  nlohmann::json j;
  j["top_k"] = assignment.top_k;
  j["neighbors"] = assignment.neighbors;
  return j.dump(2);
}

}  // namespace cfedgr
