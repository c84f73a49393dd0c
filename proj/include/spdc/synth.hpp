#pragma once

#include <atomic>
#include <cmath>
#include <span>
#include <thread>
#include <vector>

#include "spdc/common.hpp"
#include "spdc/framestack.hpp"
#include "spdc/optics.hpp"
#include "spdc/rng.hpp"
#include "spdc/sensor.hpp"

namespace spdc {

// One photon pair in crystal-plane coordinates: positions [m] in the
// position basis, transverse momenta p/hbar [1/m] in the momentum basis.
struct PairEvent {
  double xs = 0, ys = 0;  // signal
  double xi = 0, yi = 0;  // idler
};

// Draw pair coordinates from the double-Gaussian state, per transverse axis:
//   position basis:  r_s = u+ + u-/2, r_i = u+ - u-/2,
//                    std(u-) = sigma_minus_pos, std(u+) = sigma_plus_pos
//   momentum basis:  s = p_s + p_i ~ N(0, sigma_plus_mom),
//                    d = p_s - p_i ~ N(0, sigma_minus_mom),
//                    p_s = (s+d)/2, p_i = (s-d)/2
// x and y axes are independent and identically distributed.
inline void sample_pairs_into(std::vector<PairEvent>& out, const GaussianPairState& state,
                              size_t n, Basis basis, Rng& rng) {
  state.validate();
  out.clear();
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    PairEvent ev;
    if (basis == Basis::Position) {
      for (int axis = 0; axis < 2; ++axis) {
        const double plus = rng.next_normal(state.sigma_plus_pos);
        const double minus = rng.next_normal(state.sigma_minus_pos);
        const double s = plus + 0.5 * minus;
        const double o = plus - 0.5 * minus;
        if (axis == 0) { ev.xs = s; ev.xi = o; } else { ev.ys = s; ev.yi = o; }
      }
    } else {
      for (int axis = 0; axis < 2; ++axis) {
        const double sum = rng.next_normal(state.sigma_plus_mom);
        const double diff = rng.next_normal(state.sigma_minus_mom);
        const double s = 0.5 * (sum + diff);
        const double o = 0.5 * (sum - diff);
        if (axis == 0) { ev.xs = s; ev.xi = o; } else { ev.ys = s; ev.yi = o; }
      }
    }
    out.push_back(ev);
  }
}

inline std::vector<PairEvent> sample_pairs(const GaussianPairState& state, size_t n, Basis basis,
                                           uint64_t rng_seed) {
  Rng rng(rng_seed);
  std::vector<PairEvent> out;
  sample_pairs_into(out, state, n, basis, rng);
  return out;
}

namespace detail {

// Camera-plane mapping of one photon coordinate pair, ROI-centered.
// Returns false if the photon misses its ROI.
inline bool map_to_pixel(double cx, double cy, const Rect& roi, double scale_x_to_m,
                         double pitch, int& px, int& py) {
  const double qx = cx * scale_x_to_m;
  const double qy = cy * scale_x_to_m;
  px = static_cast<int>(std::lround(roi.center_x() + qx / pitch));
  py = static_cast<int>(std::lround(roi.center_y() + qy / pitch));
  return roi.contains(px, py);
}

}  // namespace detail

// Render one frame: map each detected photon onto its ROI (imaging
// magnification in the position basis; the q = f*lambda*p/(2*pi*hbar)
// mapping with each photon's own wavelength in the momentum basis),
// apply quantum-efficiency thinning and dark counts, saturate at 1.
// Photons outside their ROI are discarded and tallied on the stack.
inline void render_frame(FrameStack& stack, uint32_t frame, std::span<const PairEvent> pairs,
                         const OpticalConfig& optics, Rng& rng,
                         uint64_t* detected = nullptr, uint64_t* dropped = nullptr) {
  const SensorModel& sensor = stack.sensor();
  const bool momentum = stack.basis() == Basis::Momentum;
  const double scale_signal = momentum
      ? optics.fourier_focal * optics.lambda_signal / kTwoPi
      : optics.magnification;
  const double scale_idler = momentum
      ? optics.fourier_focal * optics.lambda_idler / kTwoPi
      : optics.magnification;

  uint64_t n_detected = 0, n_dropped = 0;
  int px = 0, py = 0;
  for (const PairEvent& ev : pairs) {
    if (rng.next_bernoulli(sensor.quantum_efficiency)) {
      ++n_detected;
      if (detail::map_to_pixel(ev.xs, ev.ys, sensor.roi_signal, scale_signal, sensor.pixel_pitch, px, py))
        stack.set_pixel(frame, px, py);
      else
        ++n_dropped;
    }
    if (rng.next_bernoulli(sensor.quantum_efficiency)) {
      ++n_detected;
      if (detail::map_to_pixel(ev.xi, ev.yi, sensor.roi_idler, scale_idler, sensor.pixel_pitch, px, py))
        stack.set_pixel(frame, px, py);
      else
        ++n_dropped;
    }
  }

  if (sensor.dark_count_prob > 0.0) {
    const long long n_px = static_cast<long long>(sensor.width_px) * sensor.height_px;
    long long pos = rng.next_geometric_gap(sensor.dark_count_prob);
    while (pos < n_px) {
      stack.set_pixel(frame, static_cast<int>(pos % sensor.width_px),
                      static_cast<int>(pos / sensor.width_px));
      pos += 1 + rng.next_geometric_gap(sensor.dark_count_prob);
    }
  }

  if (detected) *detected += n_detected;
  if (dropped) *dropped += n_dropped;
}

// Synthesize a full stack. Frame l draws Poisson(mean_pairs_per_frame)
// pairs from an RNG stream derived from (master_seed, l), so the result is
// a pure function of its inputs and identical for every thread count.
inline FrameStack synthesize_stack(const OpticalConfig& optics, const GaussianPairState& state,
                                   const SensorModel& sensor, Basis basis, uint32_t n_frames,
                                   uint64_t master_seed, int threads = 0,
                                   const std::array<uint8_t, 32>& config_hash = {}) {
  optics.validate();
  state.validate();
  FrameStack stack = FrameStack::create(sensor, basis, n_frames, master_seed, config_hash);

  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  const unsigned n_workers = threads > 0 ? static_cast<unsigned>(threads) : hw;

  std::atomic<uint32_t> next_frame{0};
  std::atomic<uint64_t> detected_total{0}, dropped_total{0};
  auto worker = [&]() {
    std::vector<PairEvent> pairs;
    uint64_t detected = 0, dropped = 0;
    for (;;) {
      const uint32_t frame = next_frame.fetch_add(1);
      if (frame >= n_frames) break;
      Rng rng(stream_seed(master_seed, frame));
      const long n_pairs = rng.next_poisson(sensor.mean_pairs_per_frame);
      sample_pairs_into(pairs, state, static_cast<size_t>(n_pairs), basis, rng);
      render_frame(stack, frame, pairs, optics, rng, &detected, &dropped);
    }
    detected_total += detected;
    dropped_total += dropped;
  };

  if (n_workers <= 1 || n_frames < 2) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  stack.detected_photons = detected_total.load();
  stack.dropped_photons = dropped_total.load();
  return stack;
}

}  // namespace spdc
