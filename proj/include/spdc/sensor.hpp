#pragma once

#include <cstdint>

#include "spdc/common.hpp"

namespace spdc {

enum class Basis : uint8_t { Position = 0, Momentum = 1 };

inline const char* basis_name(Basis b) { return b == Basis::Position ? "position" : "momentum"; }

// Photon-counting camera model: signal and idler beams fall onto two
// disjoint regions of one thresholded sensor. Frames are binary.
struct SensorModel {
  double pixel_pitch = from_um(16);  // [m]
  int width_px = 0;
  int height_px = 0;
  Rect roi_signal;
  Rect roi_idler;
  double quantum_efficiency = 1.0;   // per photon
  double dark_count_prob = 0.0;      // per pixel per frame
  double mean_pairs_per_frame = 1.0;

  void validate() const {
    require(pixel_pitch > 0, "sensor: pixel pitch must be positive");
    require(width_px > 0 && height_px > 0, "sensor: dimensions must be positive");
    const Rect bounds{0, 0, width_px, height_px};
    for (const Rect* roi : {&roi_signal, &roi_idler}) {
      require(roi->w > 0 && roi->h > 0, "sensor: ROI must have positive size");
      require(roi->x0 >= 0 && roi->y0 >= 0 && roi->x0 + roi->w <= bounds.w && roi->y0 + roi->h <= bounds.h,
              "sensor: ROI exceeds sensor bounds");
    }
    require(!roi_signal.overlaps(roi_idler), "sensor: signal and idler ROIs must be disjoint");
    require(quantum_efficiency >= 0 && quantum_efficiency <= 1,
            "sensor: quantum efficiency must be in [0, 1]");
    require(dark_count_prob >= 0 && dark_count_prob <= 1,
            "sensor: dark count probability must be in [0, 1]");
    require(mean_pairs_per_frame >= 0, "sensor: mean pairs per frame must be >= 0");
  }

  bool operator==(const SensorModel&) const = default;
};

}  // namespace spdc
