#pragma once

#include "cosearch/autodiff/tensor.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace cosearch::ad {

using NamedTensors = std::vector<std::pair<std::string, Tensor4>>;

// Writes <stem>.f64 (little-endian doubles, parameters back to back) and
// <stem>.json (name -> offset, dims).
void save_checkpoint(const std::filesystem::path& stem, const NamedTensors& params);
NamedTensors load_checkpoint(const std::filesystem::path& stem);

}  // namespace cosearch::ad
