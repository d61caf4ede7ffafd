#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dimts/array.hpp"

namespace dimts {

/// Parsed CSV: header names plus a [rows x cols] numeric matrix.
struct CsvTable {
    std::vector<std::string> names;
    DenseArray values;  // [R x C]

    std::size_t rows() const { return values.empty() ? 0 : values.dim(0); }
    std::size_t cols() const { return names.size(); }
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const CsvTable& table);

/// Sliding windows over a multichannel series, min-max scaled to [-1, 1],
/// with the per-channel extremes kept for the inverse transform.
struct WindowedDataset {
    DenseArray windows;  // [M x L x C], normalized
    std::vector<std::string> channel_names;
    std::vector<double> ch_min;
    std::vector<double> ch_max;
    std::size_t stride = 1;

    std::size_t num_windows() const { return windows.dim(0); }
    std::size_t length() const { return windows.dim(1); }
    std::size_t channels() const { return windows.dim(2); }

    DenseArray window(std::size_t m) const;  // [L x C]
    /// Affine maps between raw units and [-1, 1]; the trailing axis is the
    /// channel axis, any leading shape is accepted.
    DenseArray normalize(const DenseArray& raw) const;
    DenseArray denormalize(const DenseArray& scaled) const;
};

WindowedDataset window_table(const CsvTable& table, std::size_t length, std::size_t stride);
WindowedDataset ingest_csv(const std::string& path, std::size_t length, std::size_t stride);

/// Binary windows plus a JSON sidecar describing channels and scaling.
void save_dataset(const std::string& dir, const WindowedDataset& ds);
WindowedDataset load_dataset(const std::string& dir);

/// Raw (denormalized) windows for evaluation. A leading `window` column
/// groups explicit windows (as written by the sampler); otherwise windows
/// slide over the series. Returns [M x L x C] and the channel names.
DenseArray eval_windows(const CsvTable& table, std::size_t length, std::size_t stride,
                        std::vector<std::string>& names_out);

/// Samples in long form: a leading `window` index column, then one column
/// per channel, L consecutive rows per window.
CsvTable samples_to_table(const DenseArray& samples, const std::vector<std::string>& names);

}  // namespace dimts
