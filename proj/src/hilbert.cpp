#include "trurm/hilbert.hpp"

#include <cmath>

#include "trurm/fft.hpp"
#include "trurm/preprocess.hpp"

namespace trurm {

ComplexSeries hilbert_analytic(std::span<const double> x) {
  require(x.size() >= 4, "hilbert_analytic: need at least 4 samples");
  const std::size_t n = x.size();
  ComplexSeries spec = rfft(x);
  const std::size_t half = n / 2;
  for (std::size_t k = 1; k < n; ++k) {
    if (k < (n + 1) / 2) {
      spec[k] *= 2.0;
    } else if (!(n % 2 == 0 && k == half)) {
      spec[k] = 0.0;
    }
  }
  ComplexSeries out = ifft(spec);
  // Real part is the input by construction; pin it to avoid rounding drift.
  for (std::size_t i = 0; i < n; ++i) out[i] = Complex{x[i], out[i].imag()};
  return out;
}

Series envelope(std::span<const double> x) {
  const ComplexSeries a = hilbert_analytic(x);
  Series env(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) env[i] = std::abs(a[i]);
  return env;
}

Series inst_freq_deviation(std::span<const Complex> perturbed, std::span<const Complex> reference,
                           double sample_rate) {
  require(perturbed.size() == reference.size(), "inst_freq_deviation: length mismatch");
  require(sample_rate > 0, "inst_freq_deviation: sample rate must be positive");
  const std::size_t n = perturbed.size();
  if (n == 0) return {};
  Series wrapped(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Complex r = perturbed[i] * std::conj(reference[i]);
    wrapped[i] = (r == Complex{0.0, 0.0}) ? 0.0 : std::arg(r);
  }
  const Series phi = unwrap_phase(wrapped);
  Series dev(n, 0.0);
  if (n == 1) return dev;
  const double scale = sample_rate / kTwoPi;
  dev[0] = (phi[1] - phi[0]) * scale;
  dev[n - 1] = (phi[n - 1] - phi[n - 2]) * scale;
  for (std::size_t i = 1; i + 1 < n; ++i) dev[i] = (phi[i + 1] - phi[i - 1]) * 0.5 * scale;
  return dev;
}

Series deviation_power_spectrum(std::span<const double> deviation) {
  const ComplexSeries spec = rfft(deviation);
  Series p(deviation.size() / 2 + 1);
  for (std::size_t k = 0; k < p.size(); ++k) p[k] = std::norm(spec[k]);
  return p;
}

}  // namespace trurm
