#pragma once

#include <string>
#include <utility>
#include <vector>

#include "diffdepth/tensor.hpp"

namespace diffdepth {

// Flat binary container of named float32 tensors (little-endian), written
// atomically, plus a plain-text manifest (<stem>.manifest.txt) listing
// names, shapes and free-form config lines. load(save(x)) is bit-exact.

using NamedTensors = std::vector<std::pair<std::string, Tensor<float>>>;

void save_checkpoint(const std::string& path, const NamedTensors& tensors,
                     const std::vector<std::string>& manifest_lines = {});

NamedTensors load_checkpoint(const std::string& path);

}  // namespace diffdepth
