#include "trurm/afd.hpp"

#include <algorithm>
#include <cmath>

#include "trurm/fft.hpp"

namespace trurm {

SosFilter butterworth_bandpass(int order, double low_hz, double high_hz, double sample_rate) {
  require(order >= 1, "butterworth_bandpass: order must be >= 1");
  require(sample_rate > 0 && low_hz > 0 && low_hz < high_hz && high_hz < sample_rate / 2.0,
          "butterworth_bandpass: invalid band edges");

  const double fs2 = 2.0 * sample_rate;
  const double wl = fs2 * std::tan(kPi * low_hz / sample_rate);
  const double wh = fs2 * std::tan(kPi * high_hz / sample_rate);
  const double w0 = std::sqrt(wl * wh);
  const double bw = wh - wl;

  SosFilter filter;
  for (int k = 0; k < order; ++k) {
    const Complex p = std::polar(1.0, kPi * (2.0 * k + order + 1) / (2.0 * order));
    const Complex half = p * bw / 2.0;
    const Complex root = std::sqrt(half * half - w0 * w0);
    for (const Complex s : {half + root, half - root}) {
      if (s.imag() <= 0.0) continue;  // keep one of each conjugate pair
      const Complex z = (fs2 + s) / (fs2 - s);
      // one zero at z = +1 and one at z = -1 per section
      filter.sections.push_back({1.0, 0.0, -1.0, 1.0, -2.0 * z.real(), std::norm(z)});
    }
  }
  require(static_cast<int>(filter.sections.size()) == order,
          "butterworth_bandpass: pole pairing failed");

  const double center = sample_rate / kPi * std::atan(w0 / fs2);
  const double g = std::abs(sos_response(filter, center, sample_rate));
  for (int i = 0; i < 3; ++i) filter.sections[0][i] /= g;
  return filter;
}

Complex sos_response(const SosFilter& filter, double freq_hz, double sample_rate) {
  const Complex z1 = std::polar(1.0, -kTwoPi * freq_hz / sample_rate);
  const Complex z2 = z1 * z1;
  Complex h{1.0, 0.0};
  for (const auto& s : filter.sections)
    h *= (s[0] + s[1] * z1 + s[2] * z2) / (s[3] + s[4] * z1 + s[5] * z2);
  return h;
}

namespace {

Series sosfilt_with_state(const SosFilter& filter, std::span<const double> x,
                          std::vector<std::array<double, 2>> state) {
  Series y(x.begin(), x.end());
  for (std::size_t si = 0; si < filter.sections.size(); ++si) {
    const auto& s = filter.sections[si];
    double z1 = state[si][0];
    double z2 = state[si][1];
    for (double& v : y) {
      const double in = v;
      const double out = s[0] * in + z1;
      z1 = s[1] * in - s[4] * out + z2;
      z2 = s[2] * in - s[5] * out;
      v = out;
    }
  }
  return y;
}

// Steady-state section states for a unit step input, cascaded.
std::vector<std::array<double, 2>> sosfilt_zi(const SosFilter& filter) {
  std::vector<std::array<double, 2>> zi(filter.sections.size());
  double scale = 1.0;
  for (std::size_t i = 0; i < filter.sections.size(); ++i) {
    const auto& s = filter.sections[i];
    const double g = (s[0] + s[1] + s[2]) / (1.0 + s[4] + s[5]);
    const double z2 = s[2] - s[5] * g;
    const double z1 = s[1] - s[4] * g + z2;
    zi[i] = {scale * z1, scale * z2};
    scale *= g;
  }
  return zi;
}

std::vector<std::array<double, 2>> scaled(std::vector<std::array<double, 2>> zi, double x0) {
  for (auto& z : zi) {
    z[0] *= x0;
    z[1] *= x0;
  }
  return zi;
}

}  // namespace

Series sosfilt(const SosFilter& filter, std::span<const double> x) {
  return sosfilt_with_state(filter, x, std::vector<std::array<double, 2>>(filter.sections.size()));
}

Series sosfiltfilt(const SosFilter& filter, std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  const std::size_t pad = n - 1;
  Series ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  const auto zi = sosfilt_zi(filter);
  Series fwd = sosfilt_with_state(filter, ext, scaled(zi, ext.front()));
  std::reverse(fwd.begin(), fwd.end());
  Series bwd = sosfilt_with_state(filter, fwd, scaled(zi, fwd.front()));
  std::reverse(bwd.begin(), bwd.end());
  return Series(bwd.begin() + static_cast<std::ptrdiff_t>(pad),
                bwd.begin() + static_cast<std::ptrdiff_t>(pad + n));
}

BandSplit bandpass_butterworth(std::span<const double> segment, double sample_rate, Band band,
                               int order) {
  require(band.low_hz > 0 && band.low_hz < band.high_hz && band.high_hz < sample_rate / 2.0,
          "bandpass_butterworth: invalid band edges");
  require(!segment.empty(), "bandpass_butterworth: empty segment");
  const SosFilter filter = butterworth_bandpass(order, band.low_hz, band.high_hz, sample_rate);
  const Series centered = remove_mean(segment);
  BandSplit out;
  out.x_re = sosfiltfilt(filter, centered);
  out.x_ot.resize(centered.size());
  for (std::size_t i = 0; i < centered.size(); ++i) out.x_ot[i] = centered[i] - out.x_re[i];
  return out;
}

BandSplit bandpass_butterworth(const PhaseSegment& segment, Band band, int order) {
  return bandpass_butterworth(segment.phase, segment.sample_rate, band, order);
}

void VmdParams::validate() const {
  require(K >= 2, "VmdParams: K must be >= 2");
  require(tol > 0, "VmdParams: tol must be positive");
  require(max_iters >= 1, "VmdParams: max_iters must be >= 1");
  require(penalty_alpha > 0 && tau >= 0, "VmdParams: alpha must be positive, tau nonnegative");
}

VmdResult vmd_decompose(std::span<const double> x, double sample_rate, const VmdParams& params) {
  params.validate();
  require(sample_rate > 0, "vmd_decompose: sample rate must be positive");
  require(x.size() >= 2 * params.K, "vmd_decompose: signal shorter than 2K samples");
  require(all_finite(x), "vmd_decompose: non-finite input");

  const std::size_t n = x.size();
  const std::size_t half = n / 2;
  // Mirror extension: [reverse(first half), x, reverse(second half)].
  Series mirrored;
  mirrored.reserve(2 * n);
  for (std::size_t i = half; i-- > 0;) mirrored.push_back(x[i]);
  mirrored.insert(mirrored.end(), x.begin(), x.end());
  for (std::size_t i = n; i-- > half;) mirrored.push_back(x[i]);
  const std::size_t m = mirrored.size();

  // One-sided spectrum, bins 0..m/2, frequencies in cycles/sample so alpha is
  // independent of the sample rate. Negative frequencies are rebuilt by symmetry.
  const ComplexSeries full = rfft(mirrored);
  const std::size_t nb = m / 2 + 1;
  ComplexSeries f_hat(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(nb));
  f_hat[0] = 0.0;  // no DC mode
  Series freqs(nb);
  for (std::size_t k = 0; k < nb; ++k) freqs[k] = bin_frequency(k, m, 1.0);

  const std::size_t K = params.K;
  std::vector<ComplexSeries> u(K, ComplexSeries(nb, Complex{0.0, 0.0}));
  Series omega(K, 0.0);
  if (params.init == VmdInit::Uniform)
    for (std::size_t k = 0; k < K; ++k)
      omega[k] = 0.5 / static_cast<double>(K) * static_cast<double>(k);
  ComplexSeries lambda(nb, Complex{0.0, 0.0});

  ComplexSeries sum_all(nb, Complex{0.0, 0.0});
  VmdResult result;
  double change = 0.0;
  for (std::size_t it = 0; it < params.max_iters; ++it) {
    double diff = 0.0;
    double norm = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      ComplexSeries& uk = u[k];
      double num = 0.0;
      double den = 0.0;
      for (std::size_t b = 0; b < nb; ++b) {
        const Complex others = sum_all[b] - uk[b];
        const double d = freqs[b] - omega[k];
        const Complex next = (f_hat[b] - others - lambda[b] / 2.0) / (1.0 + params.penalty_alpha * d * d);
        diff += std::norm(next - uk[b]);
        norm += std::norm(uk[b]);
        sum_all[b] = others + next;
        uk[b] = next;
        const double p = std::norm(next);
        num += freqs[b] * p;
        den += p;
      }
      if (den > 0.0) omega[k] = num / den;
    }
    if (params.tau > 0.0)
      for (std::size_t b = 0; b < nb; ++b) lambda[b] += params.tau * (sum_all[b] - f_hat[b]);
    result.iterations = it + 1;
    change = norm > 0.0 ? diff / norm : diff;
    if (it > 0 && change < params.tol) {
      result.converged = true;
      break;
    }
    if (norm == 0.0 && diff == 0.0) {
      result.converged = true;
      break;
    }
  }

  std::vector<std::size_t> order(K);
  for (std::size_t k = 0; k < K; ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return omega[a] < omega[b]; });

  for (std::size_t idx : order) {
    ComplexSeries spec(m, Complex{0.0, 0.0});
    for (std::size_t b = 0; b < nb; ++b) spec[b] = u[idx][b];
    for (std::size_t b = 1; b < m - b; ++b) spec[m - b] = std::conj(spec[b]);
    if (m % 2 == 0) spec[m / 2] = Complex{spec[m / 2].real(), 0.0};
    const Series time = ifft_real(spec);
    VmdMode mode;
    mode.u.assign(time.begin() + static_cast<std::ptrdiff_t>(half),
                  time.begin() + static_cast<std::ptrdiff_t>(half + n));
    mode.center_hz = omega[idx] * sample_rate;
    result.modes.push_back(std::move(mode));
  }
  return result;
}

namespace {

double band_energy(std::span<const double> x, double sample_rate, Band band) {
  const ComplexSeries spec = rfft(x);
  double e = 0.0;
  for (std::size_t k = 0; k <= x.size() / 2; ++k)
    if (band.contains(bin_frequency(k, x.size(), sample_rate))) e += std::norm(spec[k]);
  return e;
}

}  // namespace

ComponentSplit split_components(const std::vector<VmdMode>& modes, double sample_rate, Band band,
                                std::span<const double> x_re) {
  require(modes.size() >= 2, "split_components: need at least two modes");
  const std::size_t n = modes.front().u.size();
  for (const auto& m : modes) require(m.u.size() == n, "split_components: mode length mismatch");
  require(x_re.empty() || x_re.size() == n, "split_components: x_re length mismatch");

  std::size_t best = 0;
  double best_e = -1.0;
  for (std::size_t k = 0; k < modes.size(); ++k) {
    const double e = band_energy(modes[k].u, sample_rate, band);
    const bool better = e > best_e ||
                        (e == best_e && modes[k].center_hz < modes[best].center_hz);
    if (better) {
      best = k;
      best_e = e;
    }
  }

  ComponentSplit out;
  out.ure_mode = best;
  out.x_ure = modes[best].u;
  out.x_pd.assign(n, 0.0);
  if (!x_re.empty()) {
    for (std::size_t i = 0; i < n; ++i) out.x_pd[i] = x_re[i] - out.x_ure[i];
  } else {
    for (std::size_t k = 0; k < modes.size(); ++k)
      if (k != best)
        for (std::size_t i = 0; i < n; ++i) out.x_pd[i] += modes[k].u[i];
  }
  return out;
}

Series DecomposedSignal::recombined() const {
  Series y(x_ure.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x_ure[i] + x_pd[i] + x_ot[i];
  return y;
}

Series DecomposedSignal::x_re() const {
  Series y(x_ure.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x_ure[i] + x_pd[i];
  return y;
}

DecomposedSignal decompose(std::span<const double> segment, double sample_rate,
                           const AfdConfig& config) {
  BandSplit split = bandpass_butterworth(segment, sample_rate, config.band, config.filter_order);
  VmdResult vmd = vmd_decompose(split.x_re, sample_rate, config.vmd);
  ComponentSplit parts = split_components(vmd.modes, sample_rate, config.band, split.x_re);
  DecomposedSignal out;
  out.x_ure = std::move(parts.x_ure);
  out.x_pd = std::move(parts.x_pd);
  out.x_ot = std::move(split.x_ot);
  out.modes = std::move(vmd.modes);
  out.ure_mode = parts.ure_mode;
  out.sample_rate = sample_rate;
  out.vmd_converged = vmd.converged;
  return out;
}

}  // namespace trurm
