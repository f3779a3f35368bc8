#include "cfedgr/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace cfedgr {

namespace {

struct IdMapper {
  std::unordered_map<std::string, int> dense;
  std::vector<std::string> labels;

  int map(const std::string& raw) {
    auto it = dense.find(raw);
    if (it != dense.end()) return it->second;
    int id = static_cast<int>(labels.size());
    dense.emplace(raw, id);
    labels.push_back(raw);
    return id;
  }
};

std::vector<std::string> tokenize(const std::string& line) {
  std::string normalized = line;
  std::replace(normalized.begin(), normalized.end(), ',', ' ');
  std::replace(normalized.begin(), normalized.end(), '\t', ' ');
  std::istringstream ss(normalized);
  std::vector<std::string> tokens;
  std::string tok;
  while (ss >> tok) tokens.push_back(tok);
  return tokens;
}

double parse_rating(const std::string& tok, int line_no) {
  try {
    size_t pos = 0;
    double r = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return r;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_no) + ": bad rating field '" + tok + "'");
  }
}

Dataset load_triples_impl(const std::string& path, double min_rating, double max_rating,
                          const std::string& name) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset file: " + path);

  Dataset ds;
  ds.name = name;
  ds.min_rating = min_rating;
  ds.max_rating = max_rating;

  IdMapper users, items;
  std::unordered_set<uint64_t> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tokens = tokenize(line);
    if (tokens.size() < 3) {
      throw ParseError("line " + std::to_string(line_no) + ": expected at least 3 fields, got " +
                       std::to_string(tokens.size()));
    }
    int u = users.map(tokens[0]);
    int i = items.map(tokens[1]);
    double r = parse_rating(tokens[2], line_no);
    if (r < min_rating || r > max_rating) {
      throw ValidationError("line " + std::to_string(line_no) + ": rating " + tokens[2] +
                            " outside declared range [" + std::to_string(min_rating) + ", " +
                            std::to_string(max_rating) + "]");
    }
    uint64_t key = (static_cast<uint64_t>(u) << 32) | static_cast<uint32_t>(i);
    if (!seen.insert(key).second) {
      throw ValidationError("line " + std::to_string(line_no) + ": duplicate (user, item) pair " +
                            tokens[0] + ", " + tokens[1]);
    }
    ds.triples.push_back({u, i, r});
  }
  if (ds.triples.empty()) throw ValidationError("empty dataset: " + path);

  ds.num_users = static_cast<int>(users.labels.size());
  ds.num_items = static_cast<int>(items.labels.size());
  ds.user_labels = std::move(users.labels);
  ds.item_labels = std::move(items.labels);
  return ds;
}

}  // namespace

Dataset load_movielens(const std::string& path) {
  return load_triples_impl(path, 1.0, 5.0, "ml-100k");
}

Dataset load_generic_triples(const std::string& path, double min_rating, double max_rating) {
  return load_triples_impl(path, min_rating, max_rating, path);
}

SplitDataset split(const Dataset& dataset, uint64_t seed) {
  std::vector<std::vector<RatingTriple>> per_user(dataset.num_users);
  for (const auto& t : dataset.triples) per_user[t.user_id].push_back(t);

  SplitDataset out;
  out.train.reserve(dataset.triples.size());
  for (int u = 0; u < dataset.num_users; ++u) {
    auto& triples = per_user[u];
    size_t q = triples.size();
    if (q >= 3) {
      Rng rng(derive_seed(seed, "split", static_cast<uint64_t>(u)));
      rng.shuffle(triples);
    }
    size_t n_val = q < 3 ? 0 : q / 10;            // floor(0.1 q)
    size_t n_test = q < 3 ? 0 : (2 * q) / 10;     // floor(0.2 q)
    for (size_t i = 0; i < q; ++i) {
      if (i < n_val) {
        out.validation.push_back(triples[i]);
      } else if (i < n_val + n_test) {
        out.test.push_back(triples[i]);
      } else {
        out.train.push_back(triples[i]);
      }
    }
  }
  return out;
}

std::vector<UserShard> make_shards(const SplitDataset& split, int num_users) {
  std::vector<UserShard> shards(num_users);
  for (int u = 0; u < num_users; ++u) shards[u].user_id = u;
  for (const auto& t : split.train) {
    auto& s = shards[t.user_id];
    s.items.push_back(t.item_id);
    s.ratings.push_back(t.rating);
  }
  return shards;
}

std::string dataset_stats_json(const Dataset& dataset) {
  double cells = static_cast<double>(dataset.num_users) * dataset.num_items;
  nlohmann::json j{
      {"name", dataset.name},
      {"users", dataset.num_users},
      {"items", dataset.num_items},
      {"ratings", dataset.triples.size()},
      {"rating_min", dataset.min_rating},
      {"rating_max", dataset.max_rating},
      {"sparsity", cells > 0 ? 1.0 - static_cast<double>(dataset.triples.size()) / cells : 0.0},
  };
  return j.dump(2);
}

}  // namespace cfedgr
