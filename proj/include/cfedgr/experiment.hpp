#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cfedgr/config.hpp"
#include "cfedgr/dataset.hpp"
#include "cfedgr/federation.hpp"

namespace cfedgr {

struct ExperimentData {
  Dataset dataset;
  SplitDataset split;
  std::vector<UserShard> shards;
};

// Loads (or generates, for toy/synthetic formats) the dataset, splits it, and
// builds per-user shards.
ExperimentData load_experiment_data(const DatasetConfig& data_cfg, uint64_t seed);

// One full run from the config. When write_artifacts is set, the output
// directory receives resolved_config.json, rounds.csv, metrics.csv,
// summary.json and checkpoint.bin, guarded by an `incomplete` marker file.
RunResult run_experiment(const ExperimentConfig& cfg, bool write_artifacts = false);

struct AblationResult {
  RunResult with_neighbors;
  RunResult without_neighbors;
  uint64_t seed = 0;
};

// Paired runs differing only in neighbor usage (identical seeds and configs;
// the no-neighbor run keeps clustering for sampling but sends empty lists).
AblationResult ablate_neighbors(const ExperimentConfig& cfg, uint64_t seed);

struct SweepPoint {
  double value = 0.0;
  RunResult result;
};

// One run per value of `parameter` (num_clusters, top_k, learning_rate or
// weight_decay), fixed seed.
std::vector<SweepPoint> sweep(const ExperimentConfig& cfg, const std::string& parameter,
                              const std::vector<double>& values);

// Artifact writers shared by the CLI subcommands.
void write_run_artifacts(const std::string& dir, const ExperimentConfig& cfg, const RunResult& result);
std::string rounds_csv(const std::vector<RoundReport>& rounds);
std::string metrics_csv(const std::vector<RoundReport>& rounds);
std::string summary_json(const ExperimentConfig& cfg, const RunResult& result);

}  // namespace cfedgr
