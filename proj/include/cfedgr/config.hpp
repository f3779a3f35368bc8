#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cfedgr/federation.hpp"
#include "cfedgr/privacy.hpp"

namespace cfedgr {

struct DatasetConfig {
  std::string path;
  std::string format = "auto";  // movielens | triples | toy | synthetic | auto
  double min_rating = 1.0;
  double max_rating = 5.0;
  std::string name;
};

struct ExperimentConfig {
  DatasetConfig data;
  int embedding_dim = 128;
  FederationConfig fed;
  PrivacyConfig privacy;
  std::string output_dir = "out";
  uint64_t seed = 42;

  // Optional harness directives.
  std::string sweep_parameter;
  std::vector<double> sweep_values;
  std::vector<uint64_t> ablate_seeds = {1, 2, 3};
};

// Parses a JSON config document. Unknown keys and out-of-range values are
// rejected with descriptive errors.
ExperimentConfig parse_config_json(const std::string& json_text);
ExperimentConfig parse_config_file(const std::string& path);

// String-keyed overrides (CLI flags win over file values). Keys use the same
// names as the JSON schema, e.g. "learning_rate", "top_k", "dataset.path".
void apply_overrides(ExperimentConfig& cfg, const std::map<std::string, std::string>& overrides);

// Range checks shared by file parsing and flag overrides.
void validate_config(const ExperimentConfig& cfg);

// Resolved config echoed into every run directory.
std::string config_json(const ExperimentConfig& cfg);

}  // namespace cfedgr
