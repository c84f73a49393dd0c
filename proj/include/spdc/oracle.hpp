#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "spdc/common.hpp"
#include "spdc/estimator.hpp"
#include "spdc/framestack.hpp"

namespace spdc {

// Brute-force reference for the FFT projections: explicit loops over all
// lit pixel pairs and frame pairs. The corrected kind bins each event by
// direct coordinate arithmetic (a + (lambda_s/lambda_i) * b, rounded to the
// nearest output bin) instead of resampling images, so it is an
// interpolation-free oracle for the fast path. Guarded to small ROIs.
inline Projection brute_force_projection(const FrameStack& stack, AxisKind kind,
                                         double lambda_signal = 0.0, double lambda_idler = 0.0,
                                         AccidentalMode mode = AccidentalMode::ConsecutiveFrames,
                                         int max_resampled_px = 8192) {
  if (kind == AxisKind::MinusPosition)
    require(stack.basis() == Basis::Position, "brute-force oracle: minus kind needs a position-basis stack");
  else
    require(stack.basis() == Basis::Momentum, "brute-force oracle: sum kinds need a momentum-basis stack");
  require(stack.n_frames() >= 2, "brute-force oracle: need at least 2 frames");
  const SensorModel& sensor = stack.sensor();
  require(sensor.roi_signal.area() <= 4096,
          "brute-force oracle: ROI area " + std::to_string(sensor.roi_signal.area()) +
              " px exceeds the 4096 px guard");

  double resample = 1.0;
  if (kind == AxisKind::CorrectedSumMomentum) {
    require(lambda_signal > 0 && lambda_idler > 0, "brute-force oracle: wavelengths must be positive");
    resample = lambda_signal / lambda_idler;
  }
  const detail::ProjGeometry g = detail::make_geometry(sensor, kind, resample, max_resampled_px);
  const size_t n_bins = static_cast<size_t>(g.out_w) * g.out_h;
  const uint32_t n = stack.n_frames();

  auto deposit_events = [&](uint32_t frame_s, uint32_t frame_i, std::vector<double>& grid) {
    const auto lit_s = stack.lit_pixels(frame_s, sensor.roi_signal);
    const auto lit_i = stack.lit_pixels(frame_i, sensor.roi_idler);
    for (const auto& [ax, ay] : lit_s) {
      for (const auto& [bx, by] : lit_i) {
        int ix, iy;
        switch (kind) {
          case AxisKind::MinusPosition:
            ix = (ax - bx) + g.roi_w - 1;
            iy = (ay - by) + g.roi_h - 1;
            break;
          case AxisKind::SumMomentum:
            ix = ax + bx;
            iy = ay + by;
            break;
          case AxisKind::CorrectedSumMomentum:
          default:
            ix = static_cast<int>(std::lround(ax + resample * bx));
            iy = static_cast<int>(std::lround(ay + resample * by));
            break;
        }
        grid[static_cast<size_t>(iy) * g.out_w + ix] += 1.0;
      }
    }
  };

  std::vector<double> prompt(n_bins, 0.0);
  for (uint32_t l = 0; l < n; ++l) deposit_events(l, l, prompt);

  std::vector<double> accidental(n_bins, 0.0);
  double n_acc = 0;
  if (mode == AccidentalMode::ConsecutiveFrames) {
    for (uint32_t l = 0; l + 1 < n; ++l) deposit_events(l, l + 1, accidental);
    n_acc = n - 1;
  } else {
    // product of mean images, evaluated pixel pair by pixel pair
    Image mean_s(g.roi_w, g.roi_h), mean_i(g.roi_w, g.roi_h);
    for (uint32_t l = 0; l < n; ++l) {
      for (const auto& [x, y] : stack.lit_pixels(l, sensor.roi_signal)) mean_s.at(x, y) += 1.0;
      for (const auto& [x, y] : stack.lit_pixels(l, sensor.roi_idler)) mean_i.at(x, y) += 1.0;
    }
    for (auto& v : mean_s.v) v /= n;
    for (auto& v : mean_i.v) v /= n;
    for (int ay = 0; ay < g.roi_h; ++ay)
      for (int ax = 0; ax < g.roi_w; ++ax) {
        const double va = mean_s.at(ax, ay);
        if (va == 0.0) continue;
        for (int by = 0; by < g.roi_h; ++by)
          for (int bx = 0; bx < g.roi_w; ++bx) {
            const double vb = mean_i.at(bx, by);
            if (vb == 0.0) continue;
            int ix, iy;
            switch (kind) {
              case AxisKind::MinusPosition:
                ix = (ax - bx) + g.roi_w - 1;
                iy = (ay - by) + g.roi_h - 1;
                break;
              case AxisKind::SumMomentum:
                ix = ax + bx;
                iy = ay + by;
                break;
              case AxisKind::CorrectedSumMomentum:
              default:
                ix = static_cast<int>(std::lround(ax + resample * bx));
                iy = static_cast<int>(std::lround(ay + resample * by));
                break;
            }
            accidental[static_cast<size_t>(iy) * g.out_w + ix] += va * vb;
          }
      }
    n_acc = 1;
  }

  Projection p;
  p.axis_kind = kind;
  p.rows = g.out_h;
  p.cols = g.out_w;
  p.center_row = g.center_y;
  p.center_col = g.center_x;
  p.bin_size = kind == AxisKind::CorrectedSumMomentum ? sensor.pixel_pitch / lambda_signal
                                                      : sensor.pixel_pitch;
  p.units = kind == AxisKind::CorrectedSumMomentum ? "qalpha" : "m_camera";
  p.values.assign(n_bins, 0.0);
  for (size_t j = 0; j < n_bins; ++j)
    p.values[j] = prompt[j] / n - accidental[j] / n_acc;
  return p;
}

}  // namespace spdc
