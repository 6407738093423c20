#pragma once

#include <complex>
#include <cstddef>
#include <memory>

namespace gmclab {

/// Cached FFTW c2c plans for an m x m grid. Plans are created once per size
/// with FFTW_ESTIMATE (deterministic plan choice) under a lock; execution on
/// caller-owned buffers is thread-safe. Buffers must come from fft_alloc so
/// their alignment matches the planned arrays. Transforms are unnormalized.
class Fft2D {
 public:
  static const Fft2D& get(int m);

  void forward(std::complex<double>* in, std::complex<double>* out) const;
  void backward(std::complex<double>* in, std::complex<double>* out) const;
  int size() const { return m_; }

 private:
  Fft2D(int m);
  int m_;
  void* fwd_;
  void* bwd_;
};

std::complex<double>* fft_alloc(std::size_t n);
void fft_free(std::complex<double>* p);

struct FftFree {
  void operator()(std::complex<double>* p) const { fft_free(p); }
};
using ComplexBuf = std::unique_ptr<std::complex<double>[], FftFree>;

inline ComplexBuf make_complex_buf(std::size_t n) { return ComplexBuf(fft_alloc(n)); }

}  // namespace gmclab
