#pragma once

#include <cstddef>
#include <string>

#include <json.hpp>

#include "dimts/losses.hpp"
#include "dimts/model.hpp"

namespace dimts {

/// Everything that determines a run: model shape, loss weights, optimizer
/// hyperparameters, windowing and the RNG seed.
struct RunConfig {
    ModelConfig model;
    LossWeights weights;
    double lr = 1e-3;
    std::size_t steps = 1000;
    std::size_t batch_size = 64;
    std::size_t checkpoint_every = 0;  // 0 = final checkpoint only
    std::size_t stride = 1;
    double sigma_scale = 1.0;
    std::string data;  // CSV path or ingested dataset directory

    void validate() const;
};

/// Applies one `key=value` setting; unknown keys and malformed values throw.
void set_config_key(RunConfig& cfg, const std::string& key, const std::string& value);

/// Flat key=value file; '#' starts a comment, blank lines are ignored.
RunConfig load_config_file(const std::string& path);

/// Stable textual echo: one key=value line per setting, fixed order.
std::string config_text(const RunConfig& cfg);
void write_config(const std::string& path, const RunConfig& cfg);

nlohmann::json config_json(const RunConfig& cfg);
RunConfig config_from_json(const nlohmann::json& j);

}  // namespace dimts
