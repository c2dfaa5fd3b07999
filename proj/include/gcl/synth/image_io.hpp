#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gcl/core/tensor.hpp"

namespace gcl::synth {

/// Writes a [3 x H x W] tensor in [0,1] as an 8-bit RGB PNG.
void write_png_rgb(const std::string& path, const Tensor& img);
/// Writes a [1 x H x W] (or [H x W]) tensor in [0,1] as an 8-bit gray PNG.
void write_png_gray(const std::string& path, const Tensor& img);

/// Reads a PNG as a [3 x H x W] tensor in [0,1] (gray inputs are replicated).
Tensor read_png_rgb(const std::string& path);
/// Reads a PNG as a [1 x H x W] tensor in [0,1] (RGB inputs use the mean).
Tensor read_png_gray(const std::string& path);

}  // namespace gcl::synth
