#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "spdc/common.hpp"
#include "spdc/estimator.hpp"
#include "spdc/framestack.hpp"
#include "spdc/sha256.hpp"

namespace spdc {

// ---------------------------------------------------------------------------
// Little-endian primitives (explicit, so files are byte-identical on any host)

namespace iodetail {

inline void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}
inline void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_f64(std::string& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

class Reader {
 public:
  Reader(const uint8_t* data, size_t size, std::string path)
      : p_(data), n_(size), path_(std::move(path)) {}

  uint8_t u8() { return take(1)[0]; }
  uint16_t u16() {
    const uint8_t* b = take(2);
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
  }
  uint32_t u32() {
    const uint8_t* b = take(4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
  }
  uint64_t u64() {
    uint64_t v = 0;
    const uint8_t* b = take(8);
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
  }
  double f64() {
    const uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  const uint8_t* take(size_t k) {
    if (pos_ + k > n_) throw std::runtime_error(path_ + ": truncated file");
    const uint8_t* out = p_ + pos_;
    pos_ += k;
    return out;
  }
  size_t remaining() const { return n_ - pos_; }

 private:
  const uint8_t* p_;
  size_t n_;
  size_t pos_ = 0;
  std::string path_;
};

inline std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open for reading");
  in.seekg(0, std::ios::end);
  const std::streamoff size = in.tellg();
  in.seekg(0);
  std::vector<uint8_t> data(static_cast<size_t>(size));
  if (size > 0) in.read(reinterpret_cast<char*>(data.data()), size);
  if (!in) throw std::runtime_error(path + ": read failed");
  return data;
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace iodetail

inline std::array<uint8_t, 32> file_sha256(const std::string& path) {
  const auto data = iodetail::read_file(path);
  return Sha256::hash(data.data(), data.size());
}

// ---------------------------------------------------------------------------
// BPFS frame-stack container
//
//   offset  size  field
//   0       4     magic "BPFS"
//   4       2     version (u16, = 1)
//   6       2     width  [px] (u16)
//   8       2     height [px] (u16)
//   10      4     n_frames (u32)
//   14      1     basis tag (u8: 0 = position, 1 = momentum)
//   15      8     master RNG seed (u64)
//   23      32    config hash (SHA-256 of the resolved config)
//   55      -     frames, bit-packed
//
// Little-endian throughout. Each frame occupies ceil(width*height/8) bytes;
// pixels are packed row-major (index y*width + x), least-significant bit
// first within each byte. Every frame starts on a byte boundary.

inline constexpr char kBpfsMagic[4] = {'B', 'P', 'F', 'S'};
inline constexpr uint16_t kBpfsVersion = 1;

struct BpfsInfo {
  uint16_t width = 0;
  uint16_t height = 0;
  uint32_t n_frames = 0;
  Basis basis = Basis::Position;
  uint64_t seed = 0;
  std::array<uint8_t, 32> config_hash{};
};

inline std::string bpfs_header_bytes(const FrameStack& stack) {
  std::string out;
  out.append(kBpfsMagic, 4);
  iodetail::put_u16(out, kBpfsVersion);
  iodetail::put_u16(out, static_cast<uint16_t>(stack.sensor().width_px));
  iodetail::put_u16(out, static_cast<uint16_t>(stack.sensor().height_px));
  iodetail::put_u32(out, stack.n_frames());
  out.push_back(static_cast<char>(stack.basis()));
  iodetail::put_u64(out, stack.seed());
  out.append(reinterpret_cast<const char*>(stack.config_hash().data()), 32);
  return out;
}

inline void write_bpfs(const std::string& path, const FrameStack& stack) {
  require(stack.sensor().width_px <= 0xFFFF && stack.sensor().height_px <= 0xFFFF,
          "bpfs: sensor dimensions exceed the u16 header fields");
  std::string bytes = bpfs_header_bytes(stack);
  const auto payload = stack.raw_data();
  bytes.append(reinterpret_cast<const char*>(payload.data()), payload.size());
  iodetail::write_file(path, bytes);
}

inline BpfsInfo read_bpfs_info(const std::string& path) {
  const auto data = iodetail::read_file(path);
  iodetail::Reader r(data.data(), data.size(), path);
  const uint8_t* magic = r.take(4);
  if (std::memcmp(magic, kBpfsMagic, 4) != 0)
    throw std::runtime_error(path + ": not a BPFS file (bad magic)");
  const uint16_t version = r.u16();
  if (version != kBpfsVersion)
    throw std::runtime_error(path + ": unsupported BPFS version " + std::to_string(version));
  BpfsInfo info;
  info.width = r.u16();
  info.height = r.u16();
  info.n_frames = r.u32();
  const uint8_t basis = r.u8();
  if (basis > 1) throw std::runtime_error(path + ": invalid basis tag");
  info.basis = static_cast<Basis>(basis);
  info.seed = r.u64();
  std::memcpy(info.config_hash.data(), r.take(32), 32);
  return info;
}

// The sensor model (ROIs, pitch, rates) is not part of the binary header;
// it comes from the sidecar manifest or a config file and is validated
// against the header dimensions here.
inline FrameStack read_bpfs(const std::string& path, const SensorModel& sensor) {
  const auto data = iodetail::read_file(path);
  iodetail::Reader r(data.data(), data.size(), path);
  const uint8_t* magic = r.take(4);
  if (std::memcmp(magic, kBpfsMagic, 4) != 0)
    throw std::runtime_error(path + ": not a BPFS file (bad magic)");
  const uint16_t version = r.u16();
  if (version != kBpfsVersion)
    throw std::runtime_error(path + ": unsupported BPFS version " + std::to_string(version));
  const uint16_t width = r.u16();
  const uint16_t height = r.u16();
  const uint32_t n_frames = r.u32();
  const uint8_t basis = r.u8();
  if (basis > 1) throw std::runtime_error(path + ": invalid basis tag");
  const uint64_t seed = r.u64();
  std::array<uint8_t, 32> hash;
  std::memcpy(hash.data(), r.take(32), 32);

  if (sensor.width_px != width || sensor.height_px != height)
    throw std::runtime_error(path + ": sensor dimensions " + std::to_string(sensor.width_px) +
                             "x" + std::to_string(sensor.height_px) +
                             " do not match the file header " + std::to_string(width) + "x" +
                             std::to_string(height));
  FrameStack stack = FrameStack::create(sensor, static_cast<Basis>(basis), n_frames, seed, hash);
  const size_t expect = stack.frame_bytes() * n_frames;
  if (r.remaining() != expect)
    throw std::runtime_error(path + ": payload size " + std::to_string(r.remaining()) +
                             " does not match expected " + std::to_string(expect));
  std::memcpy(stack.raw_data().data(), r.take(expect), expect);
  return stack;
}

// ---------------------------------------------------------------------------
// BPPJ projection container
//
//   offset  size  field
//   0       4     magic "BPPJ"
//   4       2     version (u16, = 1)
//   6       1     axis kind (u8: 0 minus, 1 sum, 2 corrected sum)
//   7       1     reserved (= 0)
//   8       4     rows (u32)
//   12      4     cols (u32)
//   16      8     center_row (f64; may be fractional for the corrected axis)
//   24      8     center_col (f64)
//   32      8     bin_size (f64, physical units per bin)
//   40      2     units string length (u16), followed by that many bytes
//   -       -     values: rows*cols little-endian f64, row-major

inline constexpr char kBppjMagic[4] = {'B', 'P', 'P', 'J'};
inline constexpr uint16_t kBppjVersion = 1;

inline void write_projection(const std::string& path, const Projection& proj) {
  std::string out;
  out.append(kBppjMagic, 4);
  iodetail::put_u16(out, kBppjVersion);
  out.push_back(static_cast<char>(proj.axis_kind));
  out.push_back(0);
  iodetail::put_u32(out, static_cast<uint32_t>(proj.rows));
  iodetail::put_u32(out, static_cast<uint32_t>(proj.cols));
  iodetail::put_f64(out, proj.center_row);
  iodetail::put_f64(out, proj.center_col);
  iodetail::put_f64(out, proj.bin_size);
  iodetail::put_u16(out, static_cast<uint16_t>(proj.units.size()));
  out.append(proj.units);
  out.reserve(out.size() + proj.values.size() * 8);
  for (double v : proj.values) iodetail::put_f64(out, v);
  iodetail::write_file(path, out);
}

inline Projection read_projection(const std::string& path) {
  const auto data = iodetail::read_file(path);
  iodetail::Reader r(data.data(), data.size(), path);
  const uint8_t* magic = r.take(4);
  if (std::memcmp(magic, kBppjMagic, 4) != 0)
    throw std::runtime_error(path + ": not a BPPJ file (bad magic)");
  const uint16_t version = r.u16();
  if (version != kBppjVersion)
    throw std::runtime_error(path + ": unsupported BPPJ version " + std::to_string(version));
  Projection proj;
  const uint8_t kind = r.u8();
  if (kind > 2) throw std::runtime_error(path + ": invalid axis kind");
  proj.axis_kind = static_cast<AxisKind>(kind);
  r.u8();  // reserved
  proj.rows = static_cast<int>(r.u32());
  proj.cols = static_cast<int>(r.u32());
  proj.center_row = r.f64();
  proj.center_col = r.f64();
  proj.bin_size = r.f64();
  const uint16_t units_len = r.u16();
  proj.units.assign(reinterpret_cast<const char*>(r.take(units_len)), units_len);
  const size_t n = static_cast<size_t>(proj.rows) * proj.cols;
  proj.values.resize(n);
  for (size_t i = 0; i < n; ++i) proj.values[i] = r.f64();
  return proj;
}

// CSV export: one row per bin with the bin coordinate (offset from the zero
// of the projection variable, in bins) and the background-subtracted value.
inline void write_projection_csv(const std::string& path, const Projection& proj) {
  std::string out = "du,dv,value\n";
  char line[96];
  for (int row = 0; row < proj.rows; ++row) {
    for (int col = 0; col < proj.cols; ++col) {
      std::snprintf(line, sizeof(line), "%.9g,%.9g,%.17g\n", col - proj.center_col,
                    row - proj.center_row, proj.at(row, col));
      out += line;
    }
  }
  iodetail::write_file(path, out);
}

}  // namespace spdc
