#pragma once

#include "cotc/backend.hpp"
#include "cotc/experiment.hpp"
#include "cotc/pruner.hpp"
#include "cotc/reward.hpp"

#include <optional>
#include <string>

namespace cotc::cli {

// Merged view of all module configs, loaded from an optional JSON config
// file with flag overrides applied on top. The effective configuration is
// hashed into every output's provenance.
struct CliConfig {
    PruneConfig prune;
    RewardConfig reward;
    backend::BackendConfig backend;
    experiment::SweepSpec sweep;
    int mi_lm_count = 120;   // LMs for the bound survey
    std::uint64_t mi_seed = 7;

    // Stable digest of the effective configuration.
    std::string config_hash() const;
};

// Reads the JSON config file. Unknown keys are an error so a typo in a
// config never silently no-ops.
CliConfig load_config_file(const std::string& path);

} // namespace cotc::cli
