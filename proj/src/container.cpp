// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#include "latdir/container.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "latdir/error.hpp"

namespace latdir {
namespace {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

constexpr char kMagic[8] = {'L', 'A', 'T', 'D', 'I', 'R', 'C', 'K'};

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t offset, std::string source)
      : bytes_(bytes), pos_(offset), source_(std::move(source)) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string get_string(std::uint64_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void get_doubles(double* dst, std::uint64_t n) {
    if (n > (bytes_.size() - pos_) / sizeof(double)) fail("truncated tensor data");
    std::memcpy(dst, bytes_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
  }

  std::size_t position() const { return pos_; }

  [[noreturn]] void fail(const std::string& what) const {
    throw CorruptCheckpointError(source_ + ": " + what + " at byte " + std::to_string(pos_));
  }

 private:
  void need(std::uint64_t n) const {
    if (n > bytes_.size() - pos_) fail("unexpected end of file");
  }

  const std::string& bytes_;
  std::size_t pos_;
  std::string source_;
};

std::uint32_t crc_of(const char* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

const Tensor& Container::tensor(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t.value;
  }
  throw CheckpointError("container has no tensor named '" + name + "'");
}

bool Container::has(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return true;
  }
  return false;
}

void Container::add(std::string name, Tensor value) { tensors.push_back({std::move(name), std::move(value)}); }

void Container::add_all(const std::string& prefix, const ParamSet& params) {
  for (const auto& e : params.entries()) add(prefix + e.name, e.value);
}

ParamSet Container::extract(const std::string& prefix) const {
  ParamSet out;
  for (const auto& t : tensors) {
    if (t.name.rfind(prefix, 0) == 0) out.add(t.name.substr(prefix.size()), t.value);
  }
  return out;
}

std::string serialize_container(const Container& c) {
  std::string payload;
  const std::string header = c.header.dump();
  put<std::uint64_t>(payload, header.size());
  payload += header;
  put<std::uint64_t>(payload, c.tensors.size());
  for (const auto& t : c.tensors) {
    put<std::uint64_t>(payload, t.name.size());
    payload += t.name;
    put<std::uint64_t>(payload, t.value.rank());
    for (std::size_t d : t.value.shape()) put<std::uint64_t>(payload, d);
    payload.append(reinterpret_cast<const char*>(t.value.data()), t.value.size() * sizeof(double));
  }
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, c.version);
  put<std::uint32_t>(out, crc_of(payload.data(), payload.size()));
  put<std::uint64_t>(out, payload.size());
  out += payload;
  return out;
}

Container parse_container(const std::string& bytes, const std::string& source) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CorruptCheckpointError(source + ": not a latdir container (bad magic)");
  }
  Reader r(bytes, sizeof(kMagic), source);
  Container c;
  c.version = r.get<std::uint32_t>();
  if (c.version != Container::kVersion) {
    throw IncompatibleCheckpointError(source + ": container version " + std::to_string(c.version) +
                                      " is not supported (expected " + std::to_string(Container::kVersion) + ")");
  }
  const auto crc = r.get<std::uint32_t>();
  const auto size = r.get<std::uint64_t>();
  if (size != bytes.size() - r.position()) r.fail("payload size mismatch");
  if (crc_of(bytes.data() + r.position(), size) != crc) r.fail("checksum mismatch");

  const auto header_len = r.get<std::uint64_t>();
  try {
    c.header = nlohmann::json::parse(r.get_string(header_len));
  } catch (const nlohmann::json::exception& e) {
    r.fail(std::string("malformed header: ") + e.what());
  }
  const auto count = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = r.get_string(r.get<std::uint64_t>());
    const auto rank = r.get<std::uint64_t>();
    if (rank > 8) r.fail("implausible tensor rank");
    Shape shape(rank);
    for (auto& d : shape) d = r.get<std::uint64_t>();
    Tensor t(shape);
    r.get_doubles(t.data(), t.size());
    c.tensors.push_back({std::move(name), std::move(t)});
  }
  return c;
}

void write_container(const std::filesystem::path& path, const Container& c) {
  const std::string bytes = serialize_container(c);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw CheckpointError("failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw CheckpointError("cannot move checkpoint into place at " + path.string());
  }
}

Container read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_container(ss.str(), path.string());
}

}  // namespace latdir
