#include "gmclab/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>

#include "gmclab/errors.hpp"

namespace gmclab {

namespace {
std::mutex g_plan_mutex;
std::map<int, Fft2D*>& plan_cache() {
  static std::map<int, Fft2D*> cache;
  return cache;
}
}  // namespace

Fft2D::Fft2D(int m) : m_(m) {
  fftw_complex* a = fftw_alloc_complex(static_cast<std::size_t>(m) * m);
  fftw_complex* b = fftw_alloc_complex(static_cast<std::size_t>(m) * m);
  if (!a || !b) throw NumericError("fft buffer allocation failed");
  fwd_ = fftw_plan_dft_2d(m, m, a, b, FFTW_FORWARD, FFTW_ESTIMATE);
  bwd_ = fftw_plan_dft_2d(m, m, a, b, FFTW_BACKWARD, FFTW_ESTIMATE);
  fftw_free(a);
  fftw_free(b);
  if (!fwd_ || !bwd_) throw NumericError("fft planning failed");
}

const Fft2D& Fft2D::get(int m) {
  std::lock_guard<std::mutex> lock(g_plan_mutex);
  auto& cache = plan_cache();
  auto it = cache.find(m);
  if (it == cache.end()) it = cache.emplace(m, new Fft2D(m)).first;
  return *it->second;
}

void Fft2D::forward(std::complex<double>* in, std::complex<double>* out) const {
  fftw_execute_dft(static_cast<fftw_plan>(fwd_), reinterpret_cast<fftw_complex*>(in),
                   reinterpret_cast<fftw_complex*>(out));
}

void Fft2D::backward(std::complex<double>* in, std::complex<double>* out) const {
  fftw_execute_dft(static_cast<fftw_plan>(bwd_), reinterpret_cast<fftw_complex*>(in),
                   reinterpret_cast<fftw_complex*>(out));
}

std::complex<double>* fft_alloc(std::size_t n) {
  return reinterpret_cast<std::complex<double>*>(fftw_alloc_complex(n));
}

void fft_free(std::complex<double>* p) { fftw_free(p); }

}  // namespace gmclab
