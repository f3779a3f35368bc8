#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "cfedgr/experiment.hpp"
#include "cfedgr/serialize.hpp"
#include "cfedgr/version.hpp"

namespace {

using namespace cfedgr;

struct KnownDataset {
  const char* name;
  const char* format;
  double min_rating;
  double max_rating;
  int users;
  int items;
  int ratings;
};

// Published statistics for the three benchmark datasets.
constexpr KnownDataset kKnownDatasets[] = {
    {"filmtrust", "triples", 0.5, 4.0, 1508, 2071, 35497},
    {"ml-100k", "movielens", 1.0, 5.0, 943, 1682, 100000},
    {"douban", "triples", 1.0, 5.0, 3000, 3000, 136891},
};

const KnownDataset* find_known(const std::string& name) {
  for (const auto& k : kKnownDatasets) {
    if (name == k.name) return &k;
  }
  return nullptr;
}

struct CliOptions {
  std::string config_path;
  bool toy = false;
  std::map<std::string, std::string> overrides;

  std::string sweep_parameter;
  std::vector<double> sweep_values;
  std::vector<uint64_t> ablate_seeds;

  std::string validate_path;
  std::string validate_name;
};

// Registers the shared config flags on a subcommand; values land in
// `overrides` only when the flag is actually given, so they win over the file.
void add_config_flags(CLI::App* cmd, CliOptions& opt) {
  auto track = [&opt](const std::string& key) {
    return [&opt, key](const std::string& v) { opt.overrides[key] = v; };
  };
  cmd->add_option("--config", opt.config_path, "JSON config file");
  cmd->add_flag("--toy", opt.toy, "use the bundled 50-user synthetic dataset");
  cmd->add_option_function<std::string>("--dataset", track("dataset.path"), "path to the ratings file");
  cmd->add_option_function<std::string>("--format", track("dataset.format"),
                                        "movielens|triples|toy|synthetic|auto");
  cmd->add_option_function<std::string>("--name", track("dataset.name"), "dataset name for reports");
  cmd->add_option_function<std::string>("--rating-min", track("dataset.min_rating"), "rating scale lower bound");
  cmd->add_option_function<std::string>("--rating-max", track("dataset.max_rating"), "rating scale upper bound");
  cmd->add_option_function<std::string>("--dim", track("embedding_dim"), "embedding dimension");
  cmd->add_option_function<std::string>("--lr", track("learning_rate"), "learning rate");
  cmd->add_option_function<std::string>("--weight-decay", track("weight_decay"), "weight decay");
  cmd->add_option_function<std::string>("--users-per-round", track("users_per_round"),
                                        "participants per round");
  cmd->add_option_function<std::string>("--pretrain-rounds", track("pretrain_rounds"),
                                        "rounds before clustering starts");
  cmd->add_option_function<std::string>("--rounds", track("total_rounds"), "total training rounds");
  cmd->add_option_function<std::string>("--eval-every", track("eval_every"), "validation cadence");
  cmd->add_option_function<std::string>("--recluster-every", track("recluster_every"),
                                        "reclustering cadence (0 = once)");
  cmd->add_option_function<std::string>("--clusters", track("num_clusters"), "number of k-means clusters");
  cmd->add_option_function<std::string>("--top-k", track("top_k"), "neighbors kept per user");
  cmd->add_flag_callback(
      "--no-neighbors", [&opt]() { opt.overrides["use_neighbors"] = "false"; },
      "disable neighbor augmentation");
  cmd->add_option_function<std::string>("--clip", track("clip_threshold"), "gradient clip threshold");
  cmd->add_option_function<std::string>("--noise", track("noise_scale"), "Laplace noise scale");
  cmd->add_option_function<std::string>("--pseudo-items", track("num_pseudo_items"),
                                        "pseudo items per upload");
  cmd->add_option_function<std::string>("--threads", track("threads"), "worker threads (0 = hardware)");
  cmd->add_option_function<std::string>("--seed", track("seed"), "master seed");
  cmd->add_option_function<std::string>("--out", track("output_dir"), "output directory");
}

ExperimentConfig resolve_config(const CliOptions& opt) {
  ExperimentConfig cfg;
  if (!opt.config_path.empty()) cfg = parse_config_file(opt.config_path);
  if (opt.toy) {
    // Desk-scale defaults; explicit flags still win below.
    cfg.data.format = "toy";
    cfg.data.name = "toy-50";
    cfg.embedding_dim = 16;
    cfg.fed.users_per_round = 16;
    cfg.fed.pretrain_rounds = 3;
    cfg.fed.total_rounds = 20;
    cfg.fed.eval_every = 4;
    cfg.fed.num_clusters = 4;
    cfg.fed.top_k = 8;
    cfg.privacy.num_pseudo = 20;
    cfg.privacy.noise_scale = 0.01;
  }
  ExperimentConfig out = cfg;
  apply_overrides(out, opt.overrides);
  if (out.data.format == "auto" && out.data.path.empty()) {
    throw ConfigError("no dataset given: pass --dataset, --toy, or a config file");
  }
  return out;
}

void print_metrics(const char* label, const MetricReport& m) {
  std::printf("%s: MAE %.4f  RMSE %.4f  (%lld pairs, %.1f%% clamped)\n", label, m.mae, m.rmse, m.num_pairs,
              100.0 * m.clamped_fraction);
}

int cmd_run(const CliOptions& opt) {
  ExperimentConfig cfg = resolve_config(opt);
  RunResult res = run_experiment(cfg, /*write_artifacts=*/true);
  std::printf("run complete: %zu rounds, best val RMSE %.4f at round %d\n", res.rounds.size(),
              res.best_val_rmse, res.best_round);
  print_metrics("test", res.test_metrics);
  std::printf("artifacts in %s\n", cfg.output_dir.c_str());
  return 0;
}

int cmd_ablate(const CliOptions& opt) {
  ExperimentConfig cfg = resolve_config(opt);
  std::vector<uint64_t> seeds = opt.ablate_seeds.empty() ? cfg.ablate_seeds : opt.ablate_seeds;

  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);
  std::ofstream csv(fs::path(cfg.output_dir) / "ablation.csv");
  csv << "seed,with_mae,with_rmse,without_mae,without_rmse\n";

  double margin_sum = 0.0;
  for (uint64_t seed : seeds) {
    AblationResult ab = ablate_neighbors(cfg, seed);
    std::printf("seed %llu\n", static_cast<unsigned long long>(seed));
    print_metrics("  with neighbors   ", ab.with_neighbors.test_metrics);
    print_metrics("  without neighbors", ab.without_neighbors.test_metrics);
    margin_sum += ab.without_neighbors.test_metrics.rmse - ab.with_neighbors.test_metrics.rmse;
    char row[256];
    std::snprintf(row, sizeof row, "%llu,%.10g,%.10g,%.10g,%.10g\n",
                  static_cast<unsigned long long>(seed), ab.with_neighbors.test_metrics.mae,
                  ab.with_neighbors.test_metrics.rmse, ab.without_neighbors.test_metrics.mae,
                  ab.without_neighbors.test_metrics.rmse);
    csv << row;
  }
  std::printf("mean RMSE margin (without - with): %.4f\n", margin_sum / static_cast<double>(seeds.size()));
  return 0;
}

int cmd_sweep(const CliOptions& opt) {
  ExperimentConfig cfg = resolve_config(opt);
  std::string param = opt.sweep_parameter.empty() ? cfg.sweep_parameter : opt.sweep_parameter;
  std::vector<double> values = opt.sweep_values.empty() ? cfg.sweep_values : opt.sweep_values;
  if (param.empty() || values.empty()) throw ConfigError("sweep needs --parameter and --values");

  auto points = sweep(cfg, param, values);

  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);
  std::ofstream csv(fs::path(cfg.output_dir) / "sweep.csv");
  csv << param << ",test_mae,test_rmse,best_round,best_val_rmse\n";
  for (const auto& p : points) {
    char row[256];
    std::snprintf(row, sizeof row, "%.10g,%.10g,%.10g,%d,%.10g\n", p.value, p.result.test_metrics.mae,
                  p.result.test_metrics.rmse, p.result.best_round, p.result.best_val_rmse);
    csv << row;
    std::printf("%s=%g  test MAE %.4f  RMSE %.4f\n", param.c_str(), p.value, p.result.test_metrics.mae,
                p.result.test_metrics.rmse);
  }
  return 0;
}

int cmd_validate_data(const CliOptions& opt) {
  const KnownDataset* k = find_known(opt.validate_name);
  if (!k) {
    std::fprintf(stderr, "unknown dataset name '%s' (expected filmtrust, ml-100k, or douban)\n",
                 opt.validate_name.c_str());
    return 2;
  }
  Dataset ds = std::string(k->format) == "movielens"
                   ? load_movielens(opt.validate_path)
                   : load_generic_triples(opt.validate_path, k->min_rating, k->max_rating);

  bool ok = ds.num_users == k->users && ds.num_items == k->items &&
            static_cast<int>(ds.triples.size()) == k->ratings;
  std::printf("%-10s %8s %8s %8s\n", "", "users", "items", "ratings");
  std::printf("%-10s %8d %8d %8d\n", "expected", k->users, k->items, k->ratings);
  std::printf("%-10s %8d %8d %8zu\n", "actual", ds.num_users, ds.num_items, ds.triples.size());
  std::printf("%s\n", ok ? "PASS" : "FAIL");
  std::puts(dataset_stats_json(ds).c_str());
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated GNN recommendation simulator with cluster-derived collaborative neighbors"};
  app.set_version_flag("--version", CFEDGR_VERSION);
  app.require_subcommand(1);

  CliOptions opt;

  CLI::App* run_cmd = app.add_subcommand("run", "train and evaluate one configuration");
  add_config_flags(run_cmd, opt);

  CLI::App* ablate_cmd = app.add_subcommand("ablate", "paired runs with and without neighbors");
  add_config_flags(ablate_cmd, opt);
  ablate_cmd->add_option("--seeds", opt.ablate_seeds, "seeds for the paired runs");

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "one run per parameter value");
  add_config_flags(sweep_cmd, opt);
  sweep_cmd->add_option("--parameter", opt.sweep_parameter,
                        "num_clusters|top_k|learning_rate|weight_decay");
  sweep_cmd->add_option("--values", opt.sweep_values, "values to sweep");

  CLI::App* val_cmd = app.add_subcommand("validate-data", "check a dataset file against published statistics");
  val_cmd->add_option("--dataset", opt.validate_path, "path to the ratings file")->required();
  val_cmd->add_option("--name", opt.validate_name, "filmtrust|ml-100k|douban")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return cmd_run(opt);
    if (ablate_cmd->parsed()) return cmd_ablate(opt);
    if (sweep_cmd->parsed()) return cmd_sweep(opt);
    if (val_cmd->parsed()) return cmd_validate_data(opt);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
