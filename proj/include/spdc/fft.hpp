#pragma once

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <new>
#include <utility>

#include <fftw3.h>

#include "spdc/common.hpp"

namespace spdc {

// Smallest size >= n with only factors {2, 3, 5, 7}; keeps FFTW on its fast
// code paths for the zero-padded convolution grids.
inline int next_fast_size(int n) {
  if (n <= 1) return 1;
  for (int m = n;; ++m) {
    int r = m;
    for (int f : {2, 3, 5, 7})
      while (r % f == 0) r /= f;
    if (r == 1) return m;
  }
}

namespace detail {

template <typename T>
class FftwArray {
 public:
  explicit FftwArray(size_t n) : n_(n) {
    p_ = static_cast<T*>(fftw_malloc(sizeof(T) * n));
    if (!p_) throw std::bad_alloc();
  }
  ~FftwArray() { fftw_free(p_); }
  FftwArray(const FftwArray&) = delete;
  FftwArray& operator=(const FftwArray&) = delete;
  FftwArray(FftwArray&& o) noexcept : p_(o.p_), n_(o.n_) { o.p_ = nullptr; o.n_ = 0; }

  T* data() { return p_; }
  const T* data() const { return p_; }
  T& operator[](size_t i) { return p_[i]; }
  const T& operator[](size_t i) const { return p_[i]; }
  size_t size() const { return n_; }

 private:
  T* p_ = nullptr;
  size_t n_ = 0;
};

// Cached FFTW plans per grid size. FFTW_ESTIMATE keeps planning
// deterministic; plan creation is serialized (FFTW requirement), execution
// on distinct buffers is thread-safe. All execution buffers come from
// fftw_malloc, so their alignment matches the planning buffers.
class FftPlans {
 public:
  static const FftPlans& get(int h, int w) {
    static std::mutex mutex;
    static std::map<std::pair<int, int>, std::unique_ptr<FftPlans>> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto& slot = cache[{h, w}];
    if (!slot) slot = std::unique_ptr<FftPlans>(new FftPlans(h, w));
    return *slot;
  }

  void forward(double* in, std::complex<double>* out) const {
    fftw_execute_dft_r2c(r2c_, in, reinterpret_cast<fftw_complex*>(out));
  }
  // note: multidimensional c2r destroys its input
  void inverse(std::complex<double>* in, double* out) const {
    fftw_execute_dft_c2r(c2r_, reinterpret_cast<fftw_complex*>(in), out);
  }

  ~FftPlans() {
    fftw_destroy_plan(r2c_);
    fftw_destroy_plan(c2r_);
  }

 private:
  FftPlans(int h, int w) {
    FftwArray<double> re(static_cast<size_t>(h) * w);
    FftwArray<std::complex<double>> cx(static_cast<size_t>(h) * (w / 2 + 1));
    r2c_ = fftw_plan_dft_r2c_2d(h, w, re.data(), reinterpret_cast<fftw_complex*>(cx.data()),
                                FFTW_ESTIMATE);
    c2r_ = fftw_plan_dft_c2r_2d(h, w, reinterpret_cast<fftw_complex*>(cx.data()), re.data(),
                                FFTW_ESTIMATE);
    if (!r2c_ || !c2r_) throw std::runtime_error("fft: plan creation failed");
  }

  fftw_plan r2c_ = nullptr;
  fftw_plan c2r_ = nullptr;
};

}  // namespace detail

// Zero-padded real 2D FFT workspace of a fixed padded size.
class PaddedFft {
 public:
  PaddedFft(int padded_h, int padded_w)
      : ph_(padded_h), pw_(padded_w), cw_(padded_w / 2 + 1),
        plans_(detail::FftPlans::get(padded_h, padded_w)),
        real_(static_cast<size_t>(padded_h) * padded_w) {}

  int padded_h() const { return ph_; }
  int padded_w() const { return pw_; }
  size_t spectrum_size() const { return static_cast<size_t>(ph_) * cw_; }

  double* real_data() { return real_.data(); }
  void clear_real() { std::fill(real_.data(), real_.data() + real_.size(), 0.0); }
  void add_real(int x, int y, double value) { real_[static_cast<size_t>(y) * pw_ + x] += value; }

  // FFT of the current real buffer
  void forward(std::complex<double>* spectrum) { plans_.forward(real_.data(), spectrum); }

  // inverse FFT of `spectrum` (destroyed) into the real buffer, normalized
  void inverse(std::complex<double>* spectrum) {
    plans_.inverse(spectrum, real_.data());
    const double scale = 1.0 / (static_cast<double>(ph_) * pw_);
    for (size_t i = 0; i < real_.size(); ++i) real_[i] *= scale;
  }

  double real_at(int x, int y) const { return real_[static_cast<size_t>(y) * pw_ + x]; }

 private:
  int ph_, pw_, cw_;
  const detail::FftPlans& plans_;
  detail::FftwArray<double> real_;
};

using Spectrum = detail::FftwArray<std::complex<double>>;

inline void spectrum_clear(Spectrum& s) {
  std::fill(s.data(), s.data() + s.size(), std::complex<double>(0.0, 0.0));
}

// acc += a * b  (convolution accumulate)
inline void spectrum_accumulate_product(Spectrum& acc, const Spectrum& a, const Spectrum& b) {
  for (size_t i = 0; i < acc.size(); ++i) acc[i] += a[i] * b[i];
}

// acc += a * conj(b)  (cross-correlation accumulate)
inline void spectrum_accumulate_conj_product(Spectrum& acc, const Spectrum& a, const Spectrum& b) {
  for (size_t i = 0; i < acc.size(); ++i) acc[i] += a[i] * std::conj(b[i]);
}

}  // namespace spdc
