// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#include "latdir/image_io.hpp"

#include <png.h>

#include <csetjmp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "latdir/error.hpp"

namespace latdir {
namespace {

int color_type(std::size_t channels) {
  switch (channels) {
    case 1: return PNG_COLOR_TYPE_GRAY;
    case 3: return PNG_COLOR_TYPE_RGB;
    default: throw ShapeError("PNG supports 1 or 3 channels, got " + std::to_string(channels));
  }
}

void png_write_to_string(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), length);
}

void png_flush_noop(png_structp) {}

struct ReadCursor {
  const std::string* bytes;
  std::size_t offset;
};

void png_read_from_string(png_structp png, png_bytep data, png_size_t length) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->offset + length > cur->bytes->size()) png_error(png, "truncated PNG");
  std::memcpy(data, cur->bytes->data() + cur->offset, length);
  cur->offset += length;
}

struct PngErrorState {
  std::string message;
};

[[noreturn]] void png_raise(png_structp png, png_const_charp message) {
  static_cast<PngErrorState*>(png_get_error_ptr(png))->message = message;
  png_longjmp(png, 1);
}

void png_warn(png_structp, png_const_charp) {}

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

}  // namespace

Raster to_raster(const Tensor& images, std::size_t index) {
  if (images.rank() != 4) throw ShapeError("expected (N, C, H, W) images, got " + shape_string(images.shape()));
  if (index >= images.dim(0)) throw IndexError("image index " + std::to_string(index) + " out of range");
  Raster r;
  r.channels = images.dim(1);
  r.height = images.dim(2);
  r.width = images.dim(3);
  color_type(r.channels);
  r.pixels.resize(r.channels * r.height * r.width);
  const std::size_t plane = r.height * r.width;
  const double* src = images.data() + index * r.channels * plane;
  for (std::size_t c = 0; c < r.channels; ++c)
    for (std::size_t p = 0; p < plane; ++p) {
      const double v = std::clamp((src[c * plane + p] + 1.0) * 0.5, 0.0, 1.0);
      r.pixels[p * r.channels + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  return r;
}

Raster tile_grid(const std::vector<std::vector<Raster>>& rows, std::size_t pad) {
  if (rows.empty() || rows.front().empty()) throw ShapeError("empty image grid");
  const Raster& cell = rows.front().front();
  std::size_t cols = 0;
  for (const auto& row : rows) {
    cols = std::max(cols, row.size());
    for (const auto& r : row) {
      if (r.width != cell.width || r.height != cell.height || r.channels != cell.channels) {
        throw ShapeError("grid cells differ in size");
      }
    }
  }
  Raster grid;
  grid.channels = cell.channels;
  grid.width = cols * cell.width + (cols - 1) * pad;
  grid.height = rows.size() * cell.height + (rows.size() - 1) * pad;
  grid.pixels.assign(grid.width * grid.height * grid.channels, 0);
  const std::size_t line = cell.width * cell.channels;
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      const std::size_t x0 = j * (cell.width + pad), y0 = i * (cell.height + pad);
      for (std::size_t y = 0; y < cell.height; ++y) {
        std::copy_n(rows[i][j].pixels.begin() + y * line, line,
                    grid.pixels.begin() + ((y0 + y) * grid.width + x0) * grid.channels);
      }
    }
  return grid;
}

std::string encode_png(const Raster& image) {
  const int type = color_type(image.channels);
  if (image.pixels.size() != image.width * image.height * image.channels || image.width == 0 || image.height == 0) {
    throw ShapeError("raster size does not match its dimensions");
  }
  PngErrorState err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_raise, png_warn);
  if (!png) throw Error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  std::string out;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("PNG encode: " + err.message);
  }
  {
    png_set_write_fn(png, &out, png_write_to_string, png_flush_noop);
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8, type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t stride = image.width * image.channels;
    for (std::size_t y = 0; y < image.height; ++y) {
      png_write_row(png, const_cast<png_bytep>(image.pixels.data() + y * stride));
    }
    png_write_end(png, nullptr);
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

Raster decode_png(const std::string& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0) {
    throw InputError("not a PNG stream");
  }
  PngErrorState err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_raise, png_warn);
  if (!png) throw Error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error("png_create_info_struct failed");
  }
  ReadCursor cursor{&bytes, 0};
  Raster r;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InputError("PNG decode: " + err.message);
  }
  {
    png_set_read_fn(png, &cursor, png_read_from_string);
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);
    r.width = png_get_image_width(png, info);
    r.height = png_get_image_height(png, info);
    r.channels = png_get_channels(png, info);
    if (r.channels != 1 && r.channels != 3) png_error(png, "unsupported channel count");
    r.pixels.resize(r.width * r.height * r.channels);
    for (std::size_t y = 0; y < r.height; ++y) png_read_row(png, r.pixels.data() + y * r.width * r.channels, nullptr);
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return r;
}

void write_png(const std::filesystem::path& path, const Raster& image) {
  const std::string bytes = encode_png(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

Raster read_png(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return decode_png(std::string(std::istreambuf_iterator<char>(in), {}));
}

std::string base64_encode(const std::string& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (std::uint8_t(bytes[i]) << 16) | (std::uint8_t(bytes[i + 1]) << 8) | std::uint8_t(bytes[i + 2]);
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (i < bytes.size()) {
    std::uint32_t v = std::uint8_t(bytes[i]) << 16;
    if (i + 1 < bytes.size()) v |= std::uint8_t(bytes[i + 1]) << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += i + 1 < bytes.size() ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::string base64_decode(const std::string& text) {
  std::array<int, 256> table;
  table.fill(-1);
  for (int i = 0; i < 64; ++i) table[static_cast<unsigned char>(kAlphabet[i])] = i;
  std::string out;
  std::uint32_t acc = 0;
  int bits = 0;
  for (char ch : text) {
    if (ch == '=') break;
    const int v = table[static_cast<unsigned char>(ch)];
    if (v < 0) throw InputError("invalid base64 character");
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out += static_cast<char>((acc >> bits) & 0xFF);
    }
  }
  return out;
}

}  // namespace latdir
