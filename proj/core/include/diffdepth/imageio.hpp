#pragma once

#include <string>

#include "diffdepth/tensor.hpp"

namespace diffdepth {

// PFM: "Pf" (1 channel) / "PF" (3 channels), "<w> <h>", scale line with
// negative sign for little-endian payload, rows stored bottom-up.
// Lossless for float32 — the depth interchange format.
void write_pfm(const std::string& path, const Tensor<float>& img);
Tensor<float> read_pfm(const std::string& path);

// PGM: binary "P5", maxval up to 65535 (16-bit samples big-endian per the
// netpbm convention). Values in [lo, hi] are scaled onto [0, maxval].
void write_pgm(const std::string& path, const Tensor<float>& img, int maxval, float lo, float hi);

struct PgmImage {
    Tensor<float> img;  // [h,w], raw sample values
    int maxval = 0;
};
PgmImage read_pgm(const std::string& path);

}  // namespace diffdepth
