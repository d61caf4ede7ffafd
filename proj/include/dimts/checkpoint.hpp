#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dimts/array.hpp"

namespace dimts {

/// On-disk model snapshot. Binary layout (all integers little-endian):
///   magic "DIMTSCKP" | u32 version | u64 meta_len | meta (UTF-8 JSON)
///   | u64 n_params | per param: u64 name_len, name, u32 ndim, u64 dims...,
///     float64 data...
/// A pretty-printed copy of `meta` is written next to the file as
/// `<path>.json` for inspection.
struct Checkpoint {
    nlohmann::json meta;
    std::vector<std::pair<std::string, DenseArray>> params;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

/// Single-tensor container (magic "DIMTSTEN"), used for sample batches.
void save_tensor(const std::string& path, const DenseArray& a);
DenseArray load_tensor(const std::string& path);

}  // namespace dimts
