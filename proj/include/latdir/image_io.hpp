// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "latdir/tensor.hpp"

namespace latdir {

/// 8-bit raster, interleaved channels (1 = gray, 3 = RGB).
struct Raster {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;
  std::vector<std::uint8_t> pixels;

  bool operator==(const Raster&) const = default;
};

/// Image i of an (N, C, H, W) batch with values in [-1, 1]; out-of-range
/// values are clipped.
Raster to_raster(const Tensor& images, std::size_t index);

/// Tiles equally sized rasters row-major into a grid with `pad` pixels of
/// background (black) between cells.
Raster tile_grid(const std::vector<std::vector<Raster>>& rows, std::size_t pad = 1);

std::string encode_png(const Raster& image);
Raster decode_png(const std::string& bytes);

void write_png(const std::filesystem::path& path, const Raster& image);
Raster read_png(const std::filesystem::path& path);

std::string base64_encode(const std::string& bytes);
std::string base64_decode(const std::string& text);

}  // namespace latdir
