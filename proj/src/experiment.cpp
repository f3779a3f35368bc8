#include "cfedgr/experiment.hpp"

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "cfedgr/serialize.hpp"
#include "cfedgr/synthetic.hpp"

namespace cfedgr {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write artifact: " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

std::string guess_format(const DatasetConfig& cfg) {
  if (cfg.format != "auto") return cfg.format;
  if (cfg.path.ends_with("u.data")) return "movielens";
  return "triples";
}

}  // namespace

ExperimentData load_experiment_data(const DatasetConfig& data_cfg, uint64_t seed) {
  ExperimentData data;
  std::string format = guess_format(data_cfg);
  if (format == "toy") {
    data.dataset = make_toy_dataset();
  } else if (format == "synthetic") {
    data.dataset = make_synthetic_dataset(400, 300, 10, 60, data_cfg.min_rating, data_cfg.max_rating,
                                          derive_seed(seed, "synthetic_data"), "synthetic");
  } else if (format == "movielens") {
    data.dataset = load_movielens(data_cfg.path);
  } else if (format == "triples") {
    data.dataset = load_generic_triples(data_cfg.path, data_cfg.min_rating, data_cfg.max_rating);
  } else {
    throw ConfigError("unknown dataset format '" + format + "'");
  }
  if (!data_cfg.name.empty()) data.dataset.name = data_cfg.name;
  data.split = split(data.dataset, derive_seed(seed, "split"));
  data.shards = make_shards(data.split, data.dataset.num_users);
  return data;
}

RunResult run_experiment(const ExperimentConfig& cfg, bool write_artifacts_flag) {
  validate_config(cfg);
  ExperimentData data = load_experiment_data(cfg.data, cfg.seed);

  FederationConfig fed = cfg.fed;
  fed.seed = cfg.seed;
  fed.users_per_round = std::min(fed.users_per_round, data.dataset.num_users);
  if (fed.num_clusters > data.dataset.num_users) {
    throw ConfigError("num_clusters exceeds the dataset's user count");
  }

  if (write_artifacts_flag) {
    // Flag the run as in progress so an aborted run leaves a visible marker.
    fs::create_directories(cfg.output_dir);
    write_text(fs::path(cfg.output_dir) / "incomplete", "run in progress\n");
  }
  RunResult result = run(data.dataset, data.split, data.shards, fed, cfg.privacy, cfg.embedding_dim);
  if (write_artifacts_flag) write_run_artifacts(cfg.output_dir, cfg, result);
  return result;
}

AblationResult ablate_neighbors(const ExperimentConfig& cfg, uint64_t seed) {
  ExperimentConfig with = cfg;
  with.seed = seed;
  with.fed.use_neighbors = true;

  ExperimentConfig without = cfg;
  without.seed = seed;
  without.fed.use_neighbors = false;

  AblationResult res;
  res.seed = seed;
  res.with_neighbors = run_experiment(with);
  res.without_neighbors = run_experiment(without);
  return res;
}

std::vector<SweepPoint> sweep(const ExperimentConfig& cfg, const std::string& parameter,
                              const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");

  std::vector<SweepPoint> points;
  points.reserve(values.size());
  for (double v : values) {
    ExperimentConfig c = cfg;
    if (parameter == "num_clusters") {
      c.fed.num_clusters = static_cast<int>(v);
    } else if (parameter == "top_k") {
      c.fed.top_k = static_cast<int>(v);
    } else if (parameter == "learning_rate") {
      c.fed.learning_rate = v;
    } else if (parameter == "weight_decay") {
      c.fed.weight_decay = v;
    } else {
      throw ConfigError("unknown sweep parameter '" + parameter + "'");
    }
    validate_config(c);
    points.push_back({v, run_experiment(c)});
  }
  return points;
}

std::string rounds_csv(const std::vector<RoundReport>& rounds) {
  std::string out = round_csv_header() + "\n";
  for (const auto& r : rounds) out += round_csv_row(r) + "\n";
  return out;
}

std::string metrics_csv(const std::vector<RoundReport>& rounds) {
  std::string out = "round,mae,rmse,num_pairs,clamped_fraction\n";
  char buf[160];
  for (const auto& r : rounds) {
    if (!r.evaluated) continue;
    std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g,%lld,%.10g\n", r.round, r.val_mae, r.val_rmse,
                  r.val_pairs, r.val_clamped_fraction);
    out += buf;
  }
  return out;
}

std::string summary_json(const ExperimentConfig& cfg, const RunResult& result) {
  nlohmann::json j;
  j["dataset"] = cfg.data.name.empty() ? cfg.data.path : cfg.data.name;
  j["rounds"] = result.rounds.size();
  j["best_round"] = result.best_round;
  j["best_val_rmse"] = result.best_val_rmse;
  j["test_mae"] = result.test_metrics.mae;
  j["test_rmse"] = result.test_metrics.rmse;
  j["test_pairs"] = result.test_metrics.num_pairs;
  j["test_clamped_fraction"] = result.test_metrics.clamped_fraction;
  j["total_uplink_bytes"] = result.total_uplink_bytes;
  j["total_downlink_bytes"] = result.total_downlink_bytes;
  j["total_neighbor_ids_sent"] = result.total_neighbor_ids_sent;
  j["mean_neighbors_per_user"] = result.mean_neighbors_per_user;
  j["seed"] = cfg.seed;
  return j.dump(2);
}

void write_run_artifacts(const std::string& dir, const ExperimentConfig& cfg, const RunResult& result) {
  fs::path out(dir);
  fs::create_directories(out);
  fs::path marker = out / "incomplete";
  if (!fs::exists(marker)) write_text(marker, "run in progress\n");

  write_text(out / "resolved_config.json", config_json(cfg) + "\n");
  write_text(out / "rounds.csv", rounds_csv(result.rounds));
  write_text(out / "metrics.csv", metrics_csv(result.rounds));
  write_text(out / "summary.json", summary_json(cfg, result) + "\n");
  save_checkpoint((out / "checkpoint.bin").string(), result.best_model, result.best_user_table,
                  result.best_item_table);

  fs::remove(marker);
}

}  // namespace cfedgr
