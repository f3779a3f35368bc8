#pragma once

#include <string>
#include <vector>

#include "cfedgr/common.hpp"

namespace cfedgr {

struct RatingTriple {
  int user_id = 0;
  int item_id = 0;
  double rating = 0.0;

  bool operator==(const RatingTriple&) const = default;
};

// Global rating matrix in sparse triple form. IDs are dense 0-based indices;
// the raw tokens from the source file are kept for reporting.
struct Dataset {
  std::string name;
  int num_users = 0;
  int num_items = 0;
  std::vector<RatingTriple> triples;
  double min_rating = 0.0;
  double max_rating = 0.0;
  std::vector<std::string> user_labels;  // dense id -> raw id token
  std::vector<std::string> item_labels;
};

struct SplitDataset {
  std::vector<RatingTriple> train;
  std::vector<RatingTriple> validation;
  std::vector<RatingTriple> test;
};

// One client's private interactions. neighbor_ids stays empty until the
// server assigns collaborative neighbors.
struct UserShard {
  int user_id = 0;
  std::vector<int> items;
  std::vector<double> ratings;
  std::vector<int> neighbor_ids;
};

// MovieLens-100K u.data: user<TAB>item<TAB>rating[<TAB>timestamp], 1-based IDs.
Dataset load_movielens(const std::string& path);

// One interaction per line, separator auto-detected among tab/comma/whitespace.
// Ratings are validated against the declared range.
Dataset load_generic_triples(const std::string& path, double min_rating, double max_rating);

// Per-user 70/10/20 split: val = floor(0.1 q), test = floor(0.2 q), remainder
// to train. Users with fewer than 3 ratings keep everything in train.
SplitDataset split(const Dataset& dataset, uint64_t seed);

// One shard per user holding only that user's training triples. The result is
// indexed by user_id (shards[u].user_id == u).
std::vector<UserShard> make_shards(const SplitDataset& split, int num_users);

// JSON summary for validation against published dataset statistics.
std::string dataset_stats_json(const Dataset& dataset);

}  // namespace cfedgr
