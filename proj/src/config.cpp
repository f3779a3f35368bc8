#include "cfedgr/config.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

namespace cfedgr {

namespace {

using nlohmann::json;

const std::set<std::string> kTopKeys = {
    "dataset",        "embedding_dim",   "learning_rate", "weight_decay",  "users_per_round",
    "pretrain_rounds", "total_rounds",   "eval_every",    "recluster_every", "num_clusters",
    "top_k",          "use_neighbors",   "threads",       "clip_threshold", "noise_scale",
    "num_pseudo_items", "output_dir",    "seed",          "sweep",          "ablate_seeds"};

const std::set<std::string> kDatasetKeys = {"path", "format", "min_rating", "max_rating", "name"};
const std::set<std::string> kSweepKeys = {"parameter", "values"};

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& scope) {
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) {
      throw ConfigError("unknown config key '" + (scope.empty() ? key : scope + "." + key) + "'");
    }
  }
}

template <class T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig parse_config_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  reject_unknown(j, kTopKeys, "");

  ExperimentConfig cfg;
  try {
    if (j.contains("dataset")) {
      const json& d = j.at("dataset");
      reject_unknown(d, kDatasetKeys, "dataset");
      get_if(d, "path", cfg.data.path);
      get_if(d, "format", cfg.data.format);
      get_if(d, "min_rating", cfg.data.min_rating);
      get_if(d, "max_rating", cfg.data.max_rating);
      get_if(d, "name", cfg.data.name);
    }
    get_if(j, "embedding_dim", cfg.embedding_dim);
    get_if(j, "learning_rate", cfg.fed.learning_rate);
    get_if(j, "weight_decay", cfg.fed.weight_decay);
    get_if(j, "users_per_round", cfg.fed.users_per_round);
    get_if(j, "pretrain_rounds", cfg.fed.pretrain_rounds);
    get_if(j, "total_rounds", cfg.fed.total_rounds);
    get_if(j, "eval_every", cfg.fed.eval_every);
    get_if(j, "recluster_every", cfg.fed.recluster_every);
    get_if(j, "num_clusters", cfg.fed.num_clusters);
    get_if(j, "top_k", cfg.fed.top_k);
    get_if(j, "use_neighbors", cfg.fed.use_neighbors);
    get_if(j, "threads", cfg.fed.threads);
    get_if(j, "clip_threshold", cfg.privacy.clip_threshold);
    get_if(j, "noise_scale", cfg.privacy.noise_scale);
    get_if(j, "num_pseudo_items", cfg.privacy.num_pseudo);
    get_if(j, "output_dir", cfg.output_dir);
    get_if(j, "seed", cfg.seed);
    if (j.contains("sweep")) {
      const json& s = j.at("sweep");
      reject_unknown(s, kSweepKeys, "sweep");
      get_if(s, "parameter", cfg.sweep_parameter);
      get_if(s, "values", cfg.sweep_values);
    }
    get_if(j, "ablate_seeds", cfg.ablate_seeds);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value type: ") + e.what());
  }

  cfg.fed.seed = cfg.seed;
  validate_config(cfg);
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config_json(text);
}

void apply_overrides(ExperimentConfig& cfg, const std::map<std::string, std::string>& overrides) {
  auto to_double = [](const std::string& key, const std::string& v) {
    try {
      return std::stod(v);
    } catch (const std::exception&) {
      throw ConfigError("override '" + key + "' is not a number: " + v);
    }
  };
  auto to_int = [&](const std::string& key, const std::string& v) {
    double d = to_double(key, v);
    return static_cast<int>(d);
  };

  for (const auto& [key, value] : overrides) {
    if (key == "dataset.path") {
      cfg.data.path = value;
    } else if (key == "dataset.format") {
      cfg.data.format = value;
    } else if (key == "dataset.name") {
      cfg.data.name = value;
    } else if (key == "dataset.min_rating") {
      cfg.data.min_rating = to_double(key, value);
    } else if (key == "dataset.max_rating") {
      cfg.data.max_rating = to_double(key, value);
    } else if (key == "embedding_dim") {
      cfg.embedding_dim = to_int(key, value);
    } else if (key == "learning_rate") {
      cfg.fed.learning_rate = to_double(key, value);
    } else if (key == "weight_decay") {
      cfg.fed.weight_decay = to_double(key, value);
    } else if (key == "users_per_round") {
      cfg.fed.users_per_round = to_int(key, value);
    } else if (key == "pretrain_rounds") {
      cfg.fed.pretrain_rounds = to_int(key, value);
    } else if (key == "total_rounds") {
      cfg.fed.total_rounds = to_int(key, value);
    } else if (key == "eval_every") {
      cfg.fed.eval_every = to_int(key, value);
    } else if (key == "recluster_every") {
      cfg.fed.recluster_every = to_int(key, value);
    } else if (key == "num_clusters") {
      cfg.fed.num_clusters = to_int(key, value);
    } else if (key == "top_k") {
      cfg.fed.top_k = to_int(key, value);
    } else if (key == "use_neighbors") {
      cfg.fed.use_neighbors = value == "true" || value == "1";
    } else if (key == "threads") {
      cfg.fed.threads = to_int(key, value);
    } else if (key == "clip_threshold") {
      cfg.privacy.clip_threshold = to_double(key, value);
    } else if (key == "noise_scale") {
      cfg.privacy.noise_scale = to_double(key, value);
    } else if (key == "num_pseudo_items") {
      cfg.privacy.num_pseudo = to_int(key, value);
    } else if (key == "output_dir") {
      cfg.output_dir = value;
    } else if (key == "seed") {
      cfg.seed = static_cast<uint64_t>(std::stoull(value));
    } else {
      throw ConfigError("unknown override key '" + key + "'");
    }
  }
  cfg.fed.seed = cfg.seed;
  validate_config(cfg);
}

void validate_config(const ExperimentConfig& cfg) {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(cfg.embedding_dim >= 1, "embedding_dim must be >= 1");
  require(cfg.fed.learning_rate > 0, "learning_rate must be > 0");
  require(cfg.fed.weight_decay >= 0, "weight_decay must be >= 0");
  require(cfg.fed.users_per_round >= 1, "users_per_round must be >= 1");
  require(cfg.fed.pretrain_rounds >= 0, "pretrain_rounds must be >= 0");
  require(cfg.fed.total_rounds > cfg.fed.pretrain_rounds, "total_rounds must exceed pretrain_rounds");
  require(cfg.fed.eval_every >= 1, "eval_every must be >= 1");
  require(cfg.fed.recluster_every >= 0, "recluster_every must be >= 0");
  require(cfg.fed.num_clusters >= 1, "num_clusters must be >= 1");
  require(cfg.fed.top_k >= 0, "top_k must be >= 0");
  require(cfg.fed.threads >= 0, "threads must be >= 0");
  require(cfg.privacy.clip_threshold > 0, "clip_threshold must be > 0");
  require(cfg.privacy.noise_scale >= 0, "noise_scale must be >= 0");
  require(cfg.privacy.num_pseudo >= 0, "num_pseudo_items must be >= 0");
  require(cfg.data.min_rating < cfg.data.max_rating, "min_rating must be below max_rating");
  if (!cfg.sweep_parameter.empty()) {
    static const std::set<std::string> kParams = {"num_clusters", "top_k", "learning_rate", "weight_decay"};
    require(kParams.count(cfg.sweep_parameter) > 0,
            "unknown sweep parameter '" + cfg.sweep_parameter + "'");
  }
}

std::string config_json(const ExperimentConfig& cfg) {
  json j;
  j["dataset"] = {{"path", cfg.data.path},
                  {"format", cfg.data.format},
                  {"min_rating", cfg.data.min_rating},
                  {"max_rating", cfg.data.max_rating},
                  {"name", cfg.data.name}};
  j["embedding_dim"] = cfg.embedding_dim;
  j["learning_rate"] = cfg.fed.learning_rate;
  j["weight_decay"] = cfg.fed.weight_decay;
  j["users_per_round"] = cfg.fed.users_per_round;
  j["pretrain_rounds"] = cfg.fed.pretrain_rounds;
  j["total_rounds"] = cfg.fed.total_rounds;
  j["eval_every"] = cfg.fed.eval_every;
  j["recluster_every"] = cfg.fed.recluster_every;
  j["num_clusters"] = cfg.fed.num_clusters;
  j["top_k"] = cfg.fed.top_k;
  j["use_neighbors"] = cfg.fed.use_neighbors;
  j["threads"] = cfg.fed.threads;
  j["clip_threshold"] = cfg.privacy.clip_threshold;
  j["noise_scale"] = cfg.privacy.noise_scale;
  j["num_pseudo_items"] = cfg.privacy.num_pseudo;
  j["output_dir"] = cfg.output_dir;
  j["seed"] = cfg.seed;
  if (!cfg.sweep_parameter.empty()) {
    j["sweep"] = {{"parameter", cfg.sweep_parameter}, {"values", cfg.sweep_values}};
  }
  j["ablate_seeds"] = cfg.ablate_seeds;
  return j.dump(2);
}

}  // namespace cfedgr
