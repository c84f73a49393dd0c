#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "spdc/common.hpp"
#include "spdc/fft.hpp"
#include "spdc/framestack.hpp"
#include "spdc/sensor.hpp"

namespace spdc {

enum class AxisKind : uint8_t { MinusPosition = 0, SumMomentum = 1, CorrectedSumMomentum = 2 };

inline const char* axis_kind_name(AxisKind k) {
  switch (k) {
    case AxisKind::MinusPosition: return "minus_position";
    case AxisKind::SumMomentum: return "sum_momentum";
    case AxisKind::CorrectedSumMomentum: return "corrected_sum_momentum";
  }
  return "unknown";
}

// A background-subtracted coincidence histogram over a correlation
// coordinate. Values are counts per frame pair and may dip below zero from
// noise. bin_size is the physical step per bin along the projection
// variable: meters (camera plane) for the minus and plain sum axes, the
// dimensionless corrected sum coordinate q_s/lambda_s + q_i/lambda_i for
// the corrected axis. center_row/col locate the zero of the variable (the
// corrected axis can center between bins).
struct Projection {
  AxisKind axis_kind = AxisKind::MinusPosition;
  int rows = 0;
  int cols = 0;
  double center_row = 0;
  double center_col = 0;
  double bin_size = 0;
  std::string units;
  std::vector<double> values;

  double& at(int row, int col) { return values[static_cast<size_t>(row) * cols + col]; }
  double at(int row, int col) const { return values[static_cast<size_t>(row) * cols + col]; }
  size_t size() const { return values.size(); }
};

enum class AccidentalMode : uint8_t {
  ConsecutiveFrames = 0,  // pair frame l with frame l+1 (matched noise statistics)
  MeanProduct = 1,        // correlate the mean signal and idler images
};

struct ProjectionOptions {
  int threads = 0;        // 0 = hardware concurrency
  int chunks = 32;        // frame-pair chunks; also the bootstrap block count
  AccidentalMode accidentals = AccidentalMode::ConsecutiveFrames;
  int max_resampled_px = 8192;  // guard for the stretched idler grid
};

// Full projection plus per-chunk projections for bootstrap resampling.
// Chunk weights are prompt-pair counts. The combined projection is computed
// from raw sums (not from the normalized chunks), in a fixed pairwise
// reduction order, so it is bit-identical for any thread count.
struct ProjectionResult {
  Projection projection;
  std::vector<Projection> chunk_projections;
  std::vector<double> chunk_weights;
};

namespace detail {

struct ProjGeometry {
  int roi_w = 0, roi_h = 0;
  int str_w = 0, str_h = 0;  // stretched idler grid (equals ROI unless corrected)
  int out_w = 0, out_h = 0;
  double center_x = 0, center_y = 0;
  int pad_w = 0, pad_h = 0;
  bool correlation = false;  // cross-correlation (minus) vs convolution (sum kinds)
  double resample = 1.0;     // lambda_signal / lambda_idler for the corrected kind
};

inline ProjGeometry make_geometry(const SensorModel& sensor, AxisKind kind, double resample,
                                  int max_resampled_px) {
  const Rect& rs = sensor.roi_signal;
  const Rect& ri = sensor.roi_idler;
  require(rs.w == ri.w && rs.h == ri.h,
          "projection: signal and idler ROIs must have equal dimensions");
  ProjGeometry g;
  g.roi_w = rs.w;
  g.roi_h = rs.h;
  g.correlation = (kind == AxisKind::MinusPosition);
  g.resample = resample;
  if (kind == AxisKind::CorrectedSumMomentum) {
    g.str_w = static_cast<int>(std::ceil(resample * (rs.w - 1))) + 1;
    g.str_h = static_cast<int>(std::ceil(resample * (rs.h - 1))) + 1;
    if (g.str_w > max_resampled_px || g.str_h > max_resampled_px)
      throw std::invalid_argument(
          "projection: resampled idler ROI (" + std::to_string(g.str_w) + "x" +
          std::to_string(g.str_h) + ") exceeds the configured bound of " +
          std::to_string(max_resampled_px) + " px");
  } else {
    g.str_w = rs.w;
    g.str_h = rs.h;
  }
  if (g.correlation) {
    g.out_w = 2 * rs.w - 1;
    g.out_h = 2 * rs.h - 1;
    g.center_x = rs.w - 1;
    g.center_y = rs.h - 1;
  } else {
    g.out_w = rs.w + g.str_w - 1;
    g.out_h = rs.h + g.str_h - 1;
    g.center_x = 0.5 * (rs.w - 1) * (1.0 + resample);
    g.center_y = 0.5 * (rs.h - 1) * (1.0 + resample);
  }
  g.pad_w = next_fast_size(g.out_w);
  g.pad_h = next_fast_size(g.out_h);
  return g;
}

// Scatter the idler frame onto a grid stretched by g.resample with
// count-conserving bilinear weights. An integer stretch (factor 1) reduces
// to an exact copy, which is what makes the degenerate corrected projection
// identical to the plain sum projection.
inline void load_idler(PaddedFft& fft, const FrameStack& stack, uint32_t frame,
                       const ProjGeometry& g, Image* tally) {
  fft.clear_real();
  const Rect& roi = stack.sensor().roi_idler;
  for (int y = 0; y < roi.h; ++y) {
    for (int x = 0; x < roi.w; ++x) {
      if (!stack.pixel(frame, roi.x0 + x, roi.y0 + y)) continue;
      const double fx = g.resample * x;
      const double fy = g.resample * y;
      const int x0 = static_cast<int>(fx);
      const int y0 = static_cast<int>(fy);
      const double wx = fx - x0;
      const double wy = fy - y0;
      fft.add_real(x0, y0, (1.0 - wx) * (1.0 - wy));
      if (wx > 0.0) fft.add_real(x0 + 1, y0, wx * (1.0 - wy));
      if (wy > 0.0) fft.add_real(x0, y0 + 1, (1.0 - wx) * wy);
      if (wx > 0.0 && wy > 0.0) fft.add_real(x0 + 1, y0 + 1, wx * wy);
      if (tally) {
        tally->at(x0, y0) += (1.0 - wx) * (1.0 - wy);
        if (wx > 0.0) tally->at(x0 + 1, y0) += wx * (1.0 - wy);
        if (wy > 0.0) tally->at(x0, y0 + 1) += (1.0 - wx) * wy;
        if (wx > 0.0 && wy > 0.0) tally->at(x0 + 1, y0 + 1) += wx * wy;
      }
    }
  }
}

inline void load_signal(PaddedFft& fft, const FrameStack& stack, uint32_t frame,
                        Image* tally) {
  fft.clear_real();
  const Rect& roi = stack.sensor().roi_signal;
  for (int y = 0; y < roi.h; ++y) {
    for (int x = 0; x < roi.w; ++x) {
      if (!stack.pixel(frame, roi.x0 + x, roi.y0 + y)) continue;
      fft.add_real(x, y, 1.0);
      if (tally) tally->at(x, y) += 1.0;
    }
  }
}

// Copy the linear correlation/convolution region out of the padded grid.
inline void crop_from_padded(const PaddedFft& fft, const ProjGeometry& g, std::vector<double>& out) {
  out.assign(static_cast<size_t>(g.out_w) * g.out_h, 0.0);
  if (g.correlation) {
    for (int dy = -(g.roi_h - 1); dy <= g.roi_h - 1; ++dy) {
      const int sy = dy >= 0 ? dy : g.pad_h + dy;
      double* row = out.data() + static_cast<size_t>(dy + g.roi_h - 1) * g.out_w;
      for (int dx = -(g.roi_w - 1); dx <= g.roi_w - 1; ++dx) {
        const int sx = dx >= 0 ? dx : g.pad_w + dx;
        row[dx + g.roi_w - 1] = fft.real_at(sx, sy);
      }
    }
  } else {
    for (int y = 0; y < g.out_h; ++y)
      for (int x = 0; x < g.out_w; ++x)
        out[static_cast<size_t>(y) * g.out_w + x] = fft.real_at(x, y);
  }
}

// In-place pairwise tree reduction; result lands in parts[0]. The tree
// shape depends only on the chunk count, keeping sums reproducible.
inline void tree_reduce(std::vector<std::vector<double>>& parts) {
  for (size_t step = 1; step < parts.size(); step *= 2) {
    for (size_t i = 0; i + step < parts.size(); i += 2 * step) {
      auto& dst = parts[i];
      const auto& src = parts[i + step];
      for (size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
  }
}

inline std::vector<double> tree_reduce_images(std::vector<Image>& parts) {
  std::vector<std::vector<double>> grids;
  grids.reserve(parts.size());
  for (auto& p : parts) grids.push_back(std::move(p.v));
  tree_reduce(grids);
  return std::move(grids[0]);
}

struct ChunkStore {
  std::vector<std::vector<double>> prompt;  // per-chunk raw prompt sums (cropped)
  std::vector<std::vector<double>> acc;     // per-chunk raw accidental sums (consecutive mode)
  std::vector<Image> sum_signal;            // per-chunk image sums (mean-product mode)
  std::vector<Image> sum_idler;
  std::vector<double> n_prompt;
  std::vector<double> n_acc;
};

inline ProjectionResult run_projection(const FrameStack& stack, AxisKind kind, double resample,
                                       const ProjectionOptions& opts) {
  require(stack.n_frames() >= 2, "projection: need at least 2 frames for accidental subtraction");
  const ProjGeometry g = make_geometry(stack.sensor(), kind, resample, opts.max_resampled_px);
  const uint32_t n = stack.n_frames();
  const int n_chunks = static_cast<int>(std::min<uint32_t>(std::max(opts.chunks, 1), n));
  const bool consecutive = opts.accidentals == AccidentalMode::ConsecutiveFrames;

  ChunkStore store;
  store.prompt.resize(n_chunks);
  store.n_prompt.resize(n_chunks);
  store.n_acc.resize(n_chunks);
  if (consecutive) store.acc.resize(n_chunks);
  if (!consecutive) {
    store.sum_signal.assign(n_chunks, Image(g.roi_w, g.roi_h));
    store.sum_idler.assign(n_chunks, Image(g.str_w, g.str_h));
  }

  auto chunk_range = [&](int c) {
    const uint32_t begin = static_cast<uint32_t>(static_cast<uint64_t>(n) * c / n_chunks);
    const uint32_t end = static_cast<uint32_t>(static_cast<uint64_t>(n) * (c + 1) / n_chunks);
    return std::pair<uint32_t, uint32_t>(begin, end);
  };

  std::atomic<int> next_chunk{0};
  auto worker = [&]() {
    PaddedFft fft(g.pad_h, g.pad_w);
    Spectrum spec_signal(fft.spectrum_size());
    Spectrum spec_a(fft.spectrum_size());
    Spectrum spec_b(fft.spectrum_size());
    Spectrum acc_prompt(fft.spectrum_size());
    Spectrum acc_acc(fft.spectrum_size());
    for (;;) {
      const int c = next_chunk.fetch_add(1);
      if (c >= n_chunks) break;
      const auto [f0, f1] = chunk_range(c);
      store.n_prompt[c] = f1 - f0;
      store.n_acc[c] = (f1 == n) ? (f1 - f0 - 1) : (f1 - f0);
      spectrum_clear(acc_prompt);
      if (consecutive) spectrum_clear(acc_acc);

      Spectrum* cur = &spec_a;
      Spectrum* nxt = &spec_b;
      bool have_cur = false;
      for (uint32_t l = f0; l < f1; ++l) {
        if (!have_cur) {
          load_idler(fft, stack, l, g, consecutive ? nullptr : &store.sum_idler[c]);
          fft.forward(cur->data());
        }
        load_signal(fft, stack, l, consecutive ? nullptr : &store.sum_signal[c]);
        fft.forward(spec_signal.data());
        if (g.correlation)
          spectrum_accumulate_conj_product(acc_prompt, spec_signal, *cur);
        else
          spectrum_accumulate_product(acc_prompt, spec_signal, *cur);
        have_cur = false;
        if (consecutive && l + 1 < n) {
          load_idler(fft, stack, l + 1, g, nullptr);
          fft.forward(nxt->data());
          if (g.correlation)
            spectrum_accumulate_conj_product(acc_acc, spec_signal, *nxt);
          else
            spectrum_accumulate_product(acc_acc, spec_signal, *nxt);
          std::swap(cur, nxt);
          have_cur = true;  // cur now holds the idler spectrum of frame l+1
        }
      }

      fft.inverse(acc_prompt.data());
      crop_from_padded(fft, g, store.prompt[c]);
      if (consecutive) {
        fft.inverse(acc_acc.data());
        crop_from_padded(fft, g, store.acc[c]);
      }
    }
  };

  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  const unsigned n_workers =
      std::min<unsigned>(opts.threads > 0 ? static_cast<unsigned>(opts.threads) : hw,
                         static_cast<unsigned>(n_chunks));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  auto make_projection = [&](std::vector<double>&& values) {
    Projection p;
    p.axis_kind = kind;
    p.rows = g.out_h;
    p.cols = g.out_w;
    p.center_row = g.center_y;
    p.center_col = g.center_x;
    if (kind == AxisKind::CorrectedSumMomentum) {
      p.bin_size = stack.sensor().pixel_pitch;  // divided by lambda_signal by the caller
      p.units = "qalpha";
    } else {
      p.bin_size = stack.sensor().pixel_pitch;
      p.units = "m_camera";
    }
    p.values = std::move(values);
    return p;
  };

  // accidental estimate per frame pair from the mean images (one transform)
  auto mean_product_accidental = [&](const Image& s_sum, const Image& i_sum,
                                     double pairs) -> std::vector<double> {
    PaddedFft fft(g.pad_h, g.pad_w);
    Spectrum spec_s(fft.spectrum_size());
    Spectrum spec_i(fft.spectrum_size());
    Spectrum prod(fft.spectrum_size());
    fft.clear_real();
    for (int y = 0; y < s_sum.h; ++y)
      for (int x = 0; x < s_sum.w; ++x)
        if (s_sum.at(x, y) != 0.0) fft.add_real(x, y, s_sum.at(x, y) / pairs);
    fft.forward(spec_s.data());
    fft.clear_real();
    for (int y = 0; y < i_sum.h; ++y)
      for (int x = 0; x < i_sum.w; ++x)
        if (i_sum.at(x, y) != 0.0) fft.add_real(x, y, i_sum.at(x, y) / pairs);
    fft.forward(spec_i.data());
    spectrum_clear(prod);
    if (g.correlation)
      spectrum_accumulate_conj_product(prod, spec_s, spec_i);
    else
      spectrum_accumulate_product(prod, spec_s, spec_i);
    fft.inverse(prod.data());
    std::vector<double> out;
    crop_from_padded(fft, g, out);
    return out;
  };

  ProjectionResult result;
  result.chunk_weights.assign(store.n_prompt.begin(), store.n_prompt.end());
  result.chunk_projections.reserve(n_chunks);
  const size_t n_bins = static_cast<size_t>(g.out_w) * g.out_h;
  for (int c = 0; c < n_chunks; ++c) {
    std::vector<double> values(n_bins, 0.0);
    const double np = store.n_prompt[c];
    for (size_t j = 0; j < n_bins; ++j) values[j] = store.prompt[c][j] / np;
    if (consecutive) {
      if (store.n_acc[c] > 0) {
        const double na = store.n_acc[c];
        for (size_t j = 0; j < n_bins; ++j) values[j] -= store.acc[c][j] / na;
      }
    } else {
      const auto acc = mean_product_accidental(store.sum_signal[c], store.sum_idler[c], np);
      for (size_t j = 0; j < n_bins; ++j) values[j] -= acc[j];
    }
    result.chunk_projections.push_back(make_projection(std::move(values)));
  }

  double np_total = 0, na_total = 0;
  for (int c = 0; c < n_chunks; ++c) {
    np_total += store.n_prompt[c];
    na_total += store.n_acc[c];
  }
  tree_reduce(store.prompt);
  std::vector<double> values = std::move(store.prompt[0]);
  for (auto& v : values) v /= np_total;
  if (consecutive) {
    tree_reduce(store.acc);
    for (size_t j = 0; j < n_bins; ++j) values[j] -= store.acc[0][j] / na_total;
  } else {
    const double nd = static_cast<double>(n);
    std::vector<double> s_tot = tree_reduce_images(store.sum_signal);
    std::vector<double> i_tot = tree_reduce_images(store.sum_idler);
    Image s_img(g.roi_w, g.roi_h), i_img(g.str_w, g.str_h);
    s_img.v = std::move(s_tot);
    i_img.v = std::move(i_tot);
    const auto acc = mean_product_accidental(s_img, i_img, nd);
    for (size_t j = 0; j < n_bins; ++j) values[j] -= acc[j];
  }
  result.projection = make_projection(std::move(values));
  return result;
}

}  // namespace detail

// Projection of the position-basis JPD along r_s - r_i: per-pair
// cross-correlation of signal and idler ROI images, with accidentals
// estimated from consecutive-frame pairs (or the mean-image product) and
// subtracted. Axis is in camera-plane meters.
inline ProjectionResult minus_projection(const FrameStack& stack,
                                         const ProjectionOptions& opts = {}) {
  require(stack.basis() == Basis::Position,
          std::string("minus projection requires a position-basis stack; this stack is tagged '") +
              basis_name(stack.basis()) + "'");
  return detail::run_projection(stack, AxisKind::MinusPosition, 1.0, opts);
}

// Plain sum-coordinate projection q_s + q_i (anti-diagonal sums) of a
// momentum-basis stack. Deliberately uncorrected: for non-degenerate pairs
// its peak is artificially broadened. Axis is in camera-plane meters.
inline ProjectionResult sum_projection(const FrameStack& stack,
                                       const ProjectionOptions& opts = {}) {
  require(stack.basis() == Basis::Momentum,
          std::string("sum projection requires a momentum-basis stack; this stack is tagged '") +
              basis_name(stack.basis()) + "'");
  return detail::run_projection(stack, AxisKind::SumMomentum, 1.0, opts);
}

// Corrected sum-coordinate projection along q_s/lambda_s + q_i/lambda_i:
// the idler image is resampled onto a grid stretched by lambda_s/lambda_i
// (count-conserving bilinear scatter) before the per-pair convolution, so
// the output axis is the corrected variable. bin_size is pixel_pitch /
// lambda_signal (dimensionless corrected coordinate per bin).
inline ProjectionResult corrected_sum_projection(const FrameStack& stack, double lambda_signal,
                                                 double lambda_idler,
                                                 const ProjectionOptions& opts = {}) {
  require(stack.basis() == Basis::Momentum,
          std::string("corrected sum projection requires a momentum-basis stack; this stack is tagged '") +
              basis_name(stack.basis()) + "'");
  require(lambda_signal > 0 && lambda_idler > 0,
          "corrected sum projection: wavelengths must be positive");
  ProjectionResult result =
      detail::run_projection(stack, AxisKind::CorrectedSumMomentum,
                             lambda_signal / lambda_idler, opts);
  result.projection.bin_size /= lambda_signal;
  for (auto& chunk : result.chunk_projections) chunk.bin_size /= lambda_signal;
  return result;
}

}  // namespace spdc
