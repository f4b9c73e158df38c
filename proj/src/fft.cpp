#include "trurm/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <utility>

namespace trurm {
namespace {

// FFTW planning is not thread-safe; execution of an existing plan on fresh
// buffers is. Plans are created once per (size, direction) and kept alive.
class PlanCache {
public:
  fftw_plan get(std::size_t n, int direction) {
    std::lock_guard lock(mutex_);
    auto key = std::make_pair(n, direction);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    auto* in = fftw_alloc_complex(n);
    auto* out = fftw_alloc_complex(n);
    fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), in, out, direction,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(in);
    fftw_free(out);
    if (plan == nullptr) fail(ErrorCode::Numeric, "fft: planner failed");
    plans_.emplace(key, plan);
    return plan;
  }

private:
  std::mutex mutex_;
  std::map<std::pair<std::size_t, int>, fftw_plan> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

ComplexSeries transform(std::span<const Complex> x, int direction) {
  ComplexSeries in(x.begin(), x.end());
  ComplexSeries out(x.size());
  if (x.empty()) return out;
  fftw_plan plan = plan_cache().get(x.size(), direction);
  fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(in.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
  return out;
}

}  // namespace

ComplexSeries fft(std::span<const Complex> x) { return transform(x, FFTW_FORWARD); }

ComplexSeries ifft(std::span<const Complex> X) {
  ComplexSeries out = transform(X, FFTW_BACKWARD);
  const double scale = out.empty() ? 1.0 : 1.0 / static_cast<double>(out.size());
  for (auto& v : out) v *= scale;
  return out;
}

ComplexSeries rfft(std::span<const double> x, std::size_t n) {
  if (n == 0) n = x.size();
  require(n >= x.size(), "rfft: padded length shorter than input");
  ComplexSeries buf(n, Complex{0.0, 0.0});
  for (std::size_t i = 0; i < x.size(); ++i) buf[i] = Complex{x[i], 0.0};
  return fft(buf);
}

Series ifft_real(std::span<const Complex> X) {
  const ComplexSeries t = ifft(X);
  Series out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = t[i].real();
  return out;
}

Series hann_window(std::size_t n) {
  Series w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace trurm
