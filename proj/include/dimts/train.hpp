#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "dimts/array.hpp"
#include "dimts/autodiff.hpp"
#include "dimts/config.hpp"
#include "dimts/dataset.hpp"

namespace dimts {

/// Adam with bias correction; moments are kept in parameter-registry order
/// and round-trip through checkpoints.
struct Adam {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t step = 0;
    std::vector<DenseArray> m;
    std::vector<DenseArray> v;

    void init(const std::vector<std::pair<std::string, ad::Tensor>>& params);
    void update(std::vector<std::pair<std::string, ad::Tensor>>& params);
};

struct TrainResult {
    std::string checkpoint_path;
    std::string log_path;
    std::size_t steps_run = 0;
    double final_total = 0.0;
};

/// Streaming-window Adam optimization of the composite objective; one shared
/// diffusion step per batch. Writes the effective config, a per-step loss
/// log and periodic binary checkpoints into `out_dir`. Deterministic for a
/// fixed seed; `resume_path` continues a run bit-exactly.
TrainResult run_train(RunConfig cfg, const WindowedDataset& ds, const std::string& out_dir,
                      const std::string& resume_path = "");

struct SampleResult {
    DenseArray samples;  // [n x L x C], denormalized to raw units
    std::vector<std::string> channel_names;
};

/// Reverse-diffusion sampling from a trained checkpoint; each chain uses its
/// own RNG stream of `seed`.
SampleResult run_sample(const std::string& checkpoint_path, std::size_t n, std::uint64_t seed,
                        double sigma_scale = 1.0);

}  // namespace dimts
