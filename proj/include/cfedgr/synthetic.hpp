#pragma once

#include "cfedgr/dataset.hpp"

namespace cfedgr {

// Deterministic synthetic rating data with planted user/item biases and a
// low-rank preference structure, so that collaborative signal exists for the
// model to recover. Integer ratings on [min_rating, max_rating].
Dataset make_synthetic_dataset(int num_users, int num_items, int min_per_user, int max_per_user,
                               double min_rating, double max_rating, uint64_t seed,
                               const std::string& name = "synthetic");

// The bundled 50-user dataset behind the CLI --toy flag; runs end-to-end in
// seconds.
Dataset make_toy_dataset();

}  // namespace cfedgr
