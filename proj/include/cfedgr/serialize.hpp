#pragma once

#include <cstddef>
#include <string>

#include "cfedgr/clustering.hpp"
#include "cfedgr/model.hpp"
#include "cfedgr/privacy.hpp"

namespace cfedgr {

// Binary formats are little-endian, tagged with a magic string and a format
// version. Doubles are stored bit-exactly.

// Client upload wire format. Carries no real/pseudo distinction: the payload
// is fully determined by (d, number of rows), leaving no room for flags.
std::string encode_client_update(const ClientUpdate& update);
ClientUpdate decode_client_update(const std::string& bytes);
size_t client_update_wire_size(const ClientUpdate& update);

// Server-to-client broadcast: GAT parameters, the user's own row, neighbor
// ids + rows, and the full item table.
std::string encode_broadcast(const ModelParams& model, int user_id, std::span<const double> user_row,
                             const std::vector<int>& neighbor_ids, const Matrix& neighbor_rows,
                             const EmbeddingTable& item_table);
size_t broadcast_wire_size(int d, int num_neighbors, int num_items);

// Model checkpoint: d, both embedding tables, both layers.
void save_checkpoint(const std::string& path, const ModelParams& model, const EmbeddingTable& user_table,
                     const EmbeddingTable& item_table);
struct Checkpoint {
  ModelParams model;
  EmbeddingTable user_table;
  EmbeddingTable item_table;
};
Checkpoint load_checkpoint(const std::string& path);

// JSON snapshots for experiment inspection.
std::string cluster_state_json(const ClusterState& state);
std::string neighbor_assignment_json(const NeighborAssignment& assignment);

}  // namespace cfedgr
