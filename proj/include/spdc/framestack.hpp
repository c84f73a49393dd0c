#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <new>
#include <span>
#include <stdexcept>
#include <vector>

#include "spdc/common.hpp"
#include "spdc/sensor.hpp"

namespace spdc {

// A stack of binary photon-counting frames. Pixels are bit-packed row-major
// (pixel index y*width + x; bit index%8 within byte index/8, LSB first) and
// every frame starts on a byte boundary, so frames can be written
// concurrently without races.
class FrameStack {
 public:
  FrameStack() = default;

  static FrameStack create(const SensorModel& sensor, Basis basis, uint32_t n_frames,
                           uint64_t seed, const std::array<uint8_t, 32>& config_hash = {}) {
    sensor.validate();
    require(n_frames >= 1, "frame stack: need at least one frame");
    FrameStack stack;
    stack.sensor_ = sensor;
    stack.basis_ = basis;
    stack.seed_ = seed;
    stack.config_hash_ = config_hash;
    stack.n_frames_ = n_frames;
    stack.frame_bytes_ = (static_cast<size_t>(sensor.width_px) * sensor.height_px + 7) / 8;
    try {
      stack.bits_.assign(stack.frame_bytes_ * n_frames, 0);
    } catch (const std::bad_alloc&) {
      throw std::runtime_error("frame stack: allocation of " +
                               std::to_string(stack.frame_bytes_ * n_frames) +
                               " bytes failed (" + std::to_string(n_frames) + " frames)");
    }
    return stack;
  }

  const SensorModel& sensor() const { return sensor_; }
  Basis basis() const { return basis_; }
  uint64_t seed() const { return seed_; }
  const std::array<uint8_t, 32>& config_hash() const { return config_hash_; }
  uint32_t n_frames() const { return n_frames_; }
  size_t frame_bytes() const { return frame_bytes_; }

  std::span<uint8_t> frame_data(uint32_t frame) {
    return {bits_.data() + frame_bytes_ * frame, frame_bytes_};
  }
  std::span<const uint8_t> frame_data(uint32_t frame) const {
    return {bits_.data() + frame_bytes_ * frame, frame_bytes_};
  }
  std::span<const uint8_t> raw_data() const { return {bits_.data(), bits_.size()}; }
  std::span<uint8_t> raw_data() { return {bits_.data(), bits_.size()}; }

  void set_pixel(uint32_t frame, int x, int y) {
    const size_t p = static_cast<size_t>(y) * sensor_.width_px + x;
    bits_[frame_bytes_ * frame + p / 8] |= static_cast<uint8_t>(1u << (p % 8));
  }

  bool pixel(uint32_t frame, int x, int y) const {
    const size_t p = static_cast<size_t>(y) * sensor_.width_px + x;
    return (bits_[frame_bytes_ * frame + p / 8] >> (p % 8)) & 1u;
  }

  // Unpack one ROI of one frame to a dense grid of 0/1 values.
  Image unpack_roi(uint32_t frame, const Rect& roi) const {
    Image img(roi.w, roi.h);
    for (int y = 0; y < roi.h; ++y)
      for (int x = 0; x < roi.w; ++x)
        if (pixel(frame, roi.x0 + x, roi.y0 + y)) img.at(x, y) = 1.0;
    return img;
  }

  // Lit pixel coordinates within an ROI (ROI-local), for sparse processing.
  std::vector<std::pair<int, int>> lit_pixels(uint32_t frame, const Rect& roi) const {
    std::vector<std::pair<int, int>> out;
    for (int y = 0; y < roi.h; ++y)
      for (int x = 0; x < roi.w; ++x)
        if (pixel(frame, roi.x0 + x, roi.y0 + y)) out.emplace_back(x, y);
    return out;
  }

  uint64_t lit_count(uint32_t frame) const {
    uint64_t n = 0;
    for (uint8_t b : frame_data(frame)) n += static_cast<uint64_t>(__builtin_popcount(b));
    return n;
  }

  // diagnostics filled by the synthesizer
  uint64_t detected_photons = 0;  // photons surviving quantum efficiency
  uint64_t dropped_photons = 0;   // detected photons landing outside their ROI

  double dropped_fraction() const {
    return detected_photons ? static_cast<double>(dropped_photons) / static_cast<double>(detected_photons) : 0.0;
  }

 private:
  SensorModel sensor_;
  Basis basis_ = Basis::Position;
  uint64_t seed_ = 0;
  std::array<uint8_t, 32> config_hash_{};
  uint32_t n_frames_ = 0;
  size_t frame_bytes_ = 0;
  std::vector<uint8_t> bits_;
};

}  // namespace spdc
