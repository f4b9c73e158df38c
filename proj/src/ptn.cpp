#include "trurm/ptn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "trurm/fft.hpp"

namespace trurm {

void StftConfig::validate() const {
  require(window >= 4 && hop >= 1, "StftConfig: window must be >= 4 and hop >= 1");
  require(window <= fft_size, "StftConfig: window must not exceed fft_size");
  require(window % hop == 0 && window / hop >= 2,
          "StftConfig: hop must divide window by an integer factor >= 2");
}

StftConfig StftConfig::fitted(std::size_t length) const {
  if (length >= window) return *this;
  StftConfig c = *this;
  c.window = length - length % 4;
  c.hop = c.window / 4;
  return c;
}

namespace {

std::ptrdiff_t frame_start(std::size_t f, const StftConfig& c) {
  return static_cast<std::ptrdiff_t>(f * c.hop) - static_cast<std::ptrdiff_t>(c.window / 2);
}

std::size_t frame_count(std::size_t n, const StftConfig& c) { return 1 + (n + c.hop - 1) / c.hop; }

Series windowed_frame(std::span<const double> x, const Series& w, const StftConfig& c,
                      std::size_t f) {
  Series frame(c.window, 0.0);
  const std::ptrdiff_t s = frame_start(f, c);
  for (std::size_t t = 0; t < c.window; ++t) {
    const std::ptrdiff_t i = s + static_cast<std::ptrdiff_t>(t);
    if (i >= 0 && i < static_cast<std::ptrdiff_t>(x.size()))
      frame[t] = w[t] * x[static_cast<std::size_t>(i)];
  }
  return frame;
}

}  // namespace

Spectrogram stft(std::span<const double> x, double sample_rate, const StftConfig& config) {
  config.validate();
  require(sample_rate > 0, "stft: sample rate must be positive");
  require(x.size() >= config.window, "stft: series shorter than one window");
  const Series w = hann_window(config.window);
  const std::size_t nb = config.fft_size / 2 + 1;
  Spectrogram spec;
  spec.window = config.window;
  spec.hop = config.hop;
  spec.fft_size = config.fft_size;
  spec.sample_rate = sample_rate;
  spec.signal_length = x.size();
  spec.freqs.resize(nb);
  for (std::size_t k = 0; k < nb; ++k) spec.freqs[k] = bin_frequency(k, config.fft_size, sample_rate);
  const std::size_t nf = frame_count(x.size(), config);
  spec.M.assign(nf, Series(nb));
  spec.Phi.assign(nf, Series(nb));
  for (std::size_t f = 0; f < nf; ++f) {
    const ComplexSeries X = rfft(windowed_frame(x, w, config, f), config.fft_size);
    for (std::size_t k = 0; k < nb; ++k) {
      spec.M[f][k] = std::abs(X[k]);
      spec.Phi[f][k] = std::arg(X[k]);
    }
  }
  return spec;
}

Series istft(const Spectrogram& spec) {
  const StftConfig c{spec.window, spec.hop, spec.fft_size};
  c.validate();
  const std::size_t n = spec.signal_length;
  const std::size_t N = spec.fft_size;
  const Series w = hann_window(c.window);
  Series acc(n, 0.0);
  Series wsum(n, 0.0);
  for (std::size_t f = 0; f < spec.frames(); ++f) {
    ComplexSeries X(N);
    for (std::size_t k = 0; k <= N / 2; ++k) X[k] = std::polar(spec.M[f][k], spec.Phi[f][k]);
    for (std::size_t k = 1; k < N - k; ++k) X[N - k] = std::conj(X[k]);
    const Series frame = ifft_real(X);
    const std::ptrdiff_t s = frame_start(f, c);
    for (std::size_t t = 0; t < c.window; ++t) {
      const std::ptrdiff_t i = s + static_cast<std::ptrdiff_t>(t);
      if (i < 0 || i >= static_cast<std::ptrdiff_t>(n)) continue;
      acc[static_cast<std::size_t>(i)] += w[t] * frame[t];
      wsum[static_cast<std::size_t>(i)] += w[t] * w[t];
    }
  }
  for (std::size_t i = 0; i < n; ++i) acc[i] = wsum[i] > 1e-12 ? acc[i] / wsum[i] : 0.0;
  return acc;
}

double stft_frame_time_energy(std::span<const double> x, const StftConfig& config, std::size_t f) {
  return energy(windowed_frame(x, hann_window(config.window), config, f));
}

double stft_frame_spectral_energy(const Spectrogram& spec, std::size_t f) {
  const std::size_t N = spec.fft_size;
  double e = 0.0;
  for (std::size_t k = 0; k <= N / 2; ++k) {
    const double weight = (k == 0 || (N % 2 == 0 && k == N / 2)) ? 1.0 : 2.0;
    e += weight * spec.M[f][k] * spec.M[f][k];
  }
  return e / static_cast<double>(N);
}

std::vector<std::size_t> band_bins(const Series& freqs, Band band) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < freqs.size(); ++k)
    if (band.contains(freqs[k])) out.push_back(k);
  return out;
}

Series softmax(std::span<const double> theta) {
  if (theta.empty()) return {};
  const double mx = *std::max_element(theta.begin(), theta.end());
  Series out(theta.size());
  double z = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) z += out[i] = std::exp(theta[i] - mx);
  for (double& v : out) v /= z;
  return out;
}

namespace {

Series normalized_or_uniform(const Series& mbar, const std::vector<std::size_t>& bins) {
  Series p(bins.size());
  double total = 0.0;
  for (std::size_t i = 0; i < bins.size(); ++i) total += p[i] = mbar[bins[i]];
  if (total <= 0.0 || !std::isfinite(total)) {
    std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(bins.size()));
  } else {
    for (double& v : p) v /= total;
  }
  return p;
}

}  // namespace

BandDistributions band_distributions(const Spectrogram& spec, Band band,
                                     std::span<const double> theta_b) {
  require(spec.frames() > 0, "band_distributions: empty spectrogram");
  BandDistributions bd;
  bd.n_bins = spec.bins();
  bd.F_b = band_bins(spec.freqs, band);
  for (std::size_t k = 0; k < bd.n_bins; ++k)
    if (!band.contains(spec.freqs[k])) bd.F_o.push_back(k);
  require(!bd.F_b.empty() && !bd.F_o.empty(), "band_distributions: empty band");
  require(theta_b.empty() || theta_b.size() == bd.F_b.size(),
          "band_distributions: theta_b length must match the band");

  Series mbar(bd.n_bins, 0.0);
  for (const auto& row : spec.M)
    for (std::size_t k = 0; k < bd.n_bins; ++k) mbar[k] += row[k];
  for (double& v : mbar) v /= static_cast<double>(spec.frames());

  bd.p_b = normalized_or_uniform(mbar, bd.F_b);
  bd.p_o = normalized_or_uniform(mbar, bd.F_o);
  bd.q_b = theta_b.empty() ? Series(bd.F_b.size(), 1.0 / static_cast<double>(bd.F_b.size()))
                           : softmax(theta_b);
  bd.q_o.assign(bd.F_o.size(), 1.0 / static_cast<double>(bd.F_o.size()));
  for (auto k : bd.F_b) bd.freqs_b.push_back(spec.freqs[k]);
  for (auto k : bd.F_o) bd.freqs_o.push_back(spec.freqs[k]);
  return bd;
}

namespace {

double log_sum_exp(const Series& v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

void finish_plan(TransportPlan& plan, std::span<const double> p, std::span<const double> q,
                 std::span<const double> C) {
  plan.cost = plan.entropy = plan.kl = 0.0;
  Series rows(plan.rows, 0.0);
  Series cols(plan.cols, 0.0);
  for (std::size_t i = 0; i < plan.rows; ++i)
    for (std::size_t j = 0; j < plan.cols; ++j) {
      const double x = plan.xi[i * plan.cols + j];
      rows[i] += x;
      cols[j] += x;
      if (x <= 0.0) continue;
      plan.cost += x * C[i * plan.cols + j];
      plan.entropy -= x * std::log(x);
      plan.kl += x * std::log(x / (p[i] * q[j]));
    }
  plan.kl = std::max(plan.kl, 0.0);
  plan.objective = plan.cost + plan.nu * plan.kl;
  plan.marginal_error = 0.0;
  for (std::size_t i = 0; i < plan.rows; ++i) plan.marginal_error += std::abs(rows[i] - p[i]);
  for (std::size_t j = 0; j < plan.cols; ++j) plan.marginal_error += std::abs(cols[j] - q[j]);
}

double dual_value(std::span<const double> p, std::span<const double> q, const Series& f,
                  const Series& g, double nu) {
  // After the column update the plan has unit mass, so the exponential term is nu.
  double d = -nu;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0) d += p[i] * f[i];
  for (std::size_t j = 0; j < q.size(); ++j)
    if (q[j] > 0) d += q[j] * g[j];
  return d;
}

bool sinkhorn_kernel(std::span<const double> p, std::span<const double> q,
                     std::span<const double> C, const SinkhornOptions& opt, TransportPlan& plan) {
  const std::size_t R = plan.rows;
  const std::size_t S = plan.cols;
  const double nu = plan.nu;
  Series K(R * S);
  for (std::size_t i = 0; i < R * S; ++i) K[i] = std::exp(-C[i] / nu);
  Series u(R, 1.0);
  Series v(S, 1.0);
  Series Kv(R);
  Series Ktu(S);
  plan.dual_history.clear();
  for (std::size_t it = 0; it < opt.max_iters; ++it) {
    for (std::size_t i = 0; i < R; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < S; ++j) s += K[i * S + j] * v[j];
      Kv[i] = s;
      if (p[i] == 0.0) {
        u[i] = 0.0;
        continue;
      }
      if (!(s > 0.0) || !std::isfinite(s)) return false;
      u[i] = p[i] / s;
      if (!std::isfinite(u[i])) return false;
    }
    std::fill(Ktu.begin(), Ktu.end(), 0.0);
    for (std::size_t i = 0; i < R; ++i)
      for (std::size_t j = 0; j < S; ++j) Ktu[j] += K[i * S + j] * u[i];
    for (std::size_t j = 0; j < S; ++j) {
      if (q[j] == 0.0) {
        v[j] = 0.0;
        continue;
      }
      if (!(Ktu[j] > 0.0) || !std::isfinite(Ktu[j])) return false;
      v[j] = q[j] / Ktu[j];
      if (!std::isfinite(v[j])) return false;
    }
    Series f(R);
    Series g(S);
    for (std::size_t i = 0; i < R; ++i) f[i] = u[i] > 0 ? nu * std::log(u[i]) : 0.0;
    for (std::size_t j = 0; j < S; ++j) g[j] = v[j] > 0 ? nu * std::log(v[j]) : 0.0;
    plan.dual_history.push_back(dual_value(p, q, f, g, nu));
    plan.iters = it + 1;
    double err = 0.0;
    for (std::size_t i = 0; i < R; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < S; ++j) s += K[i * S + j] * v[j];
      err += std::abs(u[i] * s - p[i]);
    }
    if (err < opt.tol) {
      plan.converged = true;
      break;
    }
  }
  plan.xi.assign(R * S, 0.0);
  for (std::size_t i = 0; i < R; ++i)
    for (std::size_t j = 0; j < S; ++j) plan.xi[i * S + j] = u[i] * K[i * S + j] * v[j];
  for (double x : plan.xi)
    if (!std::isfinite(x)) return false;
  return true;
}

void sinkhorn_log(std::span<const double> p, std::span<const double> q, std::span<const double> C,
                  const SinkhornOptions& opt, TransportPlan& plan) {
  const std::size_t R = plan.rows;
  const std::size_t S = plan.cols;
  const double nu = plan.nu;
  const double ninf = -std::numeric_limits<double>::infinity();
  Series f(R, 0.0);
  Series g(S, 0.0);
  for (std::size_t i = 0; i < R; ++i)
    if (p[i] == 0.0) f[i] = ninf;
  for (std::size_t j = 0; j < S; ++j)
    if (q[j] == 0.0) g[j] = ninf;
  Series tmp_r(S);
  Series tmp_c(R);
  plan.dual_history.clear();
  plan.converged = false;
  for (std::size_t it = 0; it < opt.max_iters; ++it) {
    for (std::size_t i = 0; i < R; ++i) {
      if (p[i] == 0.0) continue;
      for (std::size_t j = 0; j < S; ++j) tmp_r[j] = (g[j] - C[i * S + j]) / nu;
      f[i] = nu * std::log(p[i]) - nu * log_sum_exp(tmp_r);
    }
    for (std::size_t j = 0; j < S; ++j) {
      if (q[j] == 0.0) continue;
      for (std::size_t i = 0; i < R; ++i) tmp_c[i] = (f[i] - C[i * S + j]) / nu;
      g[j] = nu * std::log(q[j]) - nu * log_sum_exp(tmp_c);
    }
    plan.dual_history.push_back(dual_value(p, q, f, g, nu));
    plan.iters = it + 1;
    double err = 0.0;
    for (std::size_t i = 0; i < R; ++i) {
      for (std::size_t j = 0; j < S; ++j) tmp_r[j] = (f[i] + g[j] - C[i * S + j]) / nu;
      const double row = p[i] == 0.0 ? 0.0 : std::exp(log_sum_exp(tmp_r));
      err += std::abs(row - p[i]);
    }
    if (err < opt.tol) {
      plan.converged = true;
      break;
    }
  }
  plan.xi.assign(R * S, 0.0);
  for (std::size_t i = 0; i < R; ++i)
    for (std::size_t j = 0; j < S; ++j) {
      const double e = (f[i] + g[j] - C[i * S + j]) / nu;
      plan.xi[i * S + j] = std::isfinite(e) ? std::exp(e) : 0.0;
    }
}

void check_distribution(std::span<const double> p, const char* what) {
  require(!p.empty(), std::string("sinkhorn: empty ") + what);
  double s = 0.0;
  for (double v : p) {
    require(std::isfinite(v) && v >= 0.0, std::string("sinkhorn: invalid ") + what);
    s += v;
  }
  require(std::abs(s - 1.0) < 1e-6, std::string("sinkhorn: ") + what + " must sum to 1");
}

}  // namespace

TransportPlan sinkhorn_cost(std::span<const double> p, std::span<const double> q,
                            std::span<const double> cost, const SinkhornOptions& options) {
  check_distribution(p, "p");
  check_distribution(q, "q");
  require(cost.size() == p.size() * q.size(), "sinkhorn: cost shape mismatch");
  require(options.max_iters >= 1 && options.tol > 0, "sinkhorn: invalid options");
  TransportPlan plan;
  plan.rows = p.size();
  plan.cols = q.size();
  double max_c = 0.0;
  for (double c : cost) {
    require(std::isfinite(c) && c >= 0.0, "sinkhorn: cost must be finite and nonnegative");
    max_c = std::max(max_c, c);
  }
  plan.nu = options.nu > 0 ? options.nu : options.nu_scale * max_c;
  if (!(plan.nu > 0)) plan.nu = options.nu_scale > 0 ? options.nu_scale : 0.05;

  bool ok = false;
  if (!options.force_log_domain) ok = sinkhorn_kernel(p, q, cost, options, plan);
  if (!ok) {
    plan.log_domain = true;
    plan.converged = false;
    sinkhorn_log(p, q, cost, options, plan);
  }
  finish_plan(plan, p, q, cost);
  return plan;
}

TransportPlan sinkhorn(std::span<const double> p, std::span<const double> q,
                       std::span<const double> freqs_p, std::span<const double> freqs_q,
                       const SinkhornOptions& options) {
  require(freqs_p.size() == p.size() && freqs_q.size() == q.size(),
          "sinkhorn: frequency vectors must match the distributions");
  Series C(p.size() * q.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < q.size(); ++j) {
      const double d = freqs_p[i] - freqs_q[j];
      C[i * q.size() + j] = d * d;
    }
  return sinkhorn_cost(p, q, C, options);
}

Series reallocation_mask(const BandDistributions& bd) {
  Series mask(bd.n_bins, 1.0);
  for (std::size_t i = 0; i < bd.F_b.size(); ++i)
    mask[bd.F_b[i]] = bd.p_b[i] > 0.0
                          ? std::clamp(bd.q_b[i] / bd.p_b[i], kMaskBandLow, kMaskBandHigh)
                          : kMaskBandHigh;
  for (std::size_t i = 0; i < bd.F_o.size(); ++i)
    mask[bd.F_o[i]] = bd.p_o[i] > 0.0
                          ? std::clamp(bd.q_o[i] / bd.p_o[i], kMaskOtherLow, kMaskOtherHigh)
                          : kMaskOtherLow;
  return mask;
}

Series apply_mask_reconstruct(const Spectrogram& spec, std::span<const double> mask) {
  require(mask.size() == spec.bins(), "apply_mask_reconstruct: mask length mismatch");
  Spectrogram masked = spec;
  for (auto& row : masked.M)
    for (std::size_t k = 0; k < row.size(); ++k) row[k] *= mask[k];
  return istft(masked);
}

// ---------------------------------------------------------------- TMB

TmbParams TmbParams::initial(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> conv(0.0, 0.3);
  std::normal_distribution<double> mix(0.0, 0.5);
  TmbParams p;
  p.layers.resize(2);
  for (auto& l : p.layers) {
    for (auto& row : l.conv_w)
      for (double& w : row) w = conv(rng);
    for (double& w : l.mix_w) w = mix(rng);
  }
  return p;
}

std::size_t TmbParams::parameter_count() const {
  constexpr std::size_t per = TmbLayer::kChannels * TmbLayer::kKernel + TmbLayer::kChannels +
                              TmbLayer::kHalf + 2;
  return layers.size() * per;
}

Series TmbParams::flatten() const {
  Series out;
  out.reserve(parameter_count());
  for (const auto& l : layers) {
    for (const auto& row : l.conv_w) out.insert(out.end(), row.begin(), row.end());
    out.insert(out.end(), l.conv_b.begin(), l.conv_b.end());
    out.insert(out.end(), l.mix_w.begin(), l.mix_w.end());
    out.push_back(l.mix_b);
    out.push_back(l.residual_scale);
  }
  return out;
}

void TmbParams::unflatten(std::span<const double> flat) {
  require(flat.size() == parameter_count(), "TmbParams::unflatten: size mismatch");
  std::size_t i = 0;
  for (auto& l : layers) {
    for (auto& row : l.conv_w)
      for (double& w : row) w = flat[i++];
    for (double& b : l.conv_b) b = flat[i++];
    for (double& w : l.mix_w) w = flat[i++];
    l.mix_b = flat[i++];
    l.residual_scale = flat[i++];
  }
}

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline std::size_t reflect(std::ptrdiff_t i, std::size_t n) {
  const auto nn = static_cast<std::ptrdiff_t>(n);
  if (i < 0) i = -i;
  if (i >= nn) i = 2 * (nn - 1) - i;
  return static_cast<std::size_t>(i);
}

struct LayerCache {
  std::array<Series, TmbLayer::kChannels> z;
  std::array<Series, TmbLayer::kHalf> h;
  std::array<Series, TmbLayer::kHalf> bn;
  Series m;
};

Series layer_forward(std::span<const double> x, const TmbLayer& l, LayerCache* cache) {
  const std::size_t n = x.size();
  constexpr std::ptrdiff_t half_k = TmbLayer::kKernel / 2;
  LayerCache local;
  LayerCache& c = cache != nullptr ? *cache : local;
  for (std::size_t ch = 0; ch < TmbLayer::kChannels; ++ch) {
    c.z[ch].assign(n, l.conv_b[ch]);
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t k = 0; k < TmbLayer::kKernel; ++k)
        c.z[ch][t] += l.conv_w[ch][k] *
                      x[reflect(static_cast<std::ptrdiff_t>(t + k) - half_k, n)];
  }
  c.m.assign(n, l.mix_b);
  for (std::size_t ch = 0; ch < TmbLayer::kHalf; ++ch) {
    const double inv = 1.0 / std::sqrt(l.running_var[ch] + kBatchNormEps);
    c.h[ch].resize(n);
    c.bn[ch].resize(n);
    for (std::size_t t = 0; t < n; ++t) {
      c.h[ch][t] = c.z[ch][t] * sigmoid(c.z[ch + TmbLayer::kHalf][t]);
      c.bn[ch][t] = (c.h[ch][t] - l.running_mean[ch]) * inv;
      c.m[t] += l.mix_w[ch] * c.bn[ch][t];
    }
  }
  Series y(x.begin(), x.end());
  if (l.residual_scale != 0.0)
    for (std::size_t t = 0; t < n; ++t) y[t] += l.residual_scale * c.m[t];
  return y;
}

}  // namespace

Series tmb_forward(std::span<const double> x, const TmbParams& params) {
  if (params.layers.empty()) return Series(x.begin(), x.end());
  require(x.size() >= TmbLayer::kKernel, "tmb_forward: series shorter than the kernel");
  Series cur(x.begin(), x.end());
  for (const auto& l : params.layers) cur = layer_forward(cur, l, nullptr);
  return cur;
}

Series tmb_backward(std::span<const double> x, const TmbParams& params,
                    std::span<const double> grad_output, Series* grad_input) {
  require(grad_output.size() == x.size(), "tmb_backward: gradient length mismatch");
  const std::size_t n = x.size();
  const std::size_t L = params.layers.size();
  if (L > 0) require(n >= TmbLayer::kKernel, "tmb_backward: series shorter than the kernel");
  std::vector<Series> inputs(L);
  std::vector<LayerCache> caches(L);
  Series cur(x.begin(), x.end());
  for (std::size_t i = 0; i < L; ++i) {
    inputs[i] = cur;
    cur = layer_forward(cur, params.layers[i], &caches[i]);
  }

  constexpr std::size_t per = TmbLayer::kChannels * TmbLayer::kKernel + TmbLayer::kChannels +
                              TmbLayer::kHalf + 2;
  Series grad(params.parameter_count(), 0.0);
  constexpr std::ptrdiff_t half_k = TmbLayer::kKernel / 2;
  Series go(grad_output.begin(), grad_output.end());
  for (std::size_t li = L; li-- > 0;) {
    const TmbLayer& l = params.layers[li];
    const LayerCache& c = caches[li];
    const Series& in = inputs[li];
    double* g = grad.data() + li * per;
    double* g_w = g;
    double* g_b = g + TmbLayer::kChannels * TmbLayer::kKernel;
    double* g_mix = g_b + TmbLayer::kChannels;
    double& g_mix_b = g_mix[TmbLayer::kHalf];
    double& g_s = g_mix[TmbLayer::kHalf + 1];

    Series dm(n);
    for (std::size_t t = 0; t < n; ++t) {
      g_s += go[t] * c.m[t];
      dm[t] = l.residual_scale * go[t];
      g_mix_b += dm[t];
    }
    Series dx = go;  // residual path
    for (std::size_t ch = 0; ch < TmbLayer::kHalf; ++ch) {
      const double inv = 1.0 / std::sqrt(l.running_var[ch] + kBatchNormEps);
      const std::size_t gate = ch + TmbLayer::kHalf;
      for (std::size_t t = 0; t < n; ++t) {
        g_mix[ch] += dm[t] * c.bn[ch][t];
        const double dh = dm[t] * l.mix_w[ch] * inv;
        const double s = sigmoid(c.z[gate][t]);
        const double dz_a = dh * s;
        const double dz_b = dh * c.z[ch][t] * s * (1.0 - s);
        for (auto [chan, dz] : {std::pair{ch, dz_a}, std::pair{gate, dz_b}}) {
          g_b[chan] += dz;
          for (std::size_t k = 0; k < TmbLayer::kKernel; ++k) {
            const std::size_t src = reflect(static_cast<std::ptrdiff_t>(t + k) - half_k, n);
            g_w[chan * TmbLayer::kKernel + k] += dz * in[src];
            dx[src] += dz * l.conv_w[chan][k];
          }
        }
      }
    }
    go = std::move(dx);
  }
  if (grad_input != nullptr) *grad_input = std::move(go);
  return grad;
}

void tmb_calibrate_stats(TmbParams& params, const std::vector<Series>& inputs) {
  require(!inputs.empty(), "tmb_calibrate_stats: no inputs");
  std::vector<Series> cur = inputs;
  for (auto& l : params.layers) {
    std::array<double, TmbLayer::kHalf> s{};
    std::array<double, TmbLayer::kHalf> s2{};
    double count = 0.0;
    for (auto& x : cur) {
      LayerCache c;
      layer_forward(x, l, &c);
      for (std::size_t ch = 0; ch < TmbLayer::kHalf; ++ch)
        for (double v : c.h[ch]) {
          s[ch] += v;
          s2[ch] += v * v;
        }
      count += static_cast<double>(x.size());
    }
    for (std::size_t ch = 0; ch < TmbLayer::kHalf; ++ch) {
      l.running_mean[ch] = s[ch] / count;
      l.running_var[ch] = std::max(s2[ch] / count - l.running_mean[ch] * l.running_mean[ch], 0.0);
    }
    for (auto& x : cur) x = layer_forward(x, l, nullptr);
  }
}

// ---------------------------------------------------------------- rate

namespace {

struct PeakSearch {
  std::size_t nfft = 0;
  Series window;
  Series centered;
  ComplexSeries Z;
  Series P;
  std::size_t k = 0;
  double delta = 0.0;
  bool refined = false;
  double a = 0, b = 0, c = 0;
  double median = 0.0;
};

PeakSearch search_peak(std::span<const double> y, double sample_rate, Band band) {
  require(y.size() >= 4, "estimate_resp_rate: series too short");
  require(sample_rate > 0, "estimate_resp_rate: sample rate must be positive");
  require(all_finite(y), "estimate_resp_rate: non-finite input");
  const double duration = static_cast<double>(y.size()) / sample_rate;
  require(duration * band.low_hz >= 1.0 - 1e-9,
          "estimate_resp_rate: series shorter than one respiratory cycle");
  PeakSearch s;
  s.nfft = std::max<std::size_t>(8192, next_pow2(y.size()));
  s.window = hann_window(y.size());
  s.centered = remove_mean(y);
  Series z(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) z[i] = s.centered[i] * s.window[i];
  s.Z = rfft(z, s.nfft);
  s.P.resize(s.nfft / 2 + 1);
  for (std::size_t k = 0; k < s.P.size(); ++k) s.P[k] = std::norm(s.Z[k]);

  Series band_p;
  double best = -1.0;
  for (std::size_t k = 0; k < s.P.size(); ++k) {
    if (!band.contains(bin_frequency(k, s.nfft, sample_rate))) continue;
    band_p.push_back(s.P[k]);
    if (s.P[k] > best) {
      best = s.P[k];
      s.k = k;
    }
  }
  require(!band_p.empty(), "estimate_resp_rate: band contains no FFT bins");
  if (!(best > 0.0)) fail(ErrorCode::NoRespiration, "no respiration detected");
  std::nth_element(band_p.begin(), band_p.begin() + static_cast<std::ptrdiff_t>(band_p.size() / 2),
                   band_p.end());
  s.median = band_p[band_p.size() / 2];

  if (s.k >= 1 && s.k + 1 < s.P.size() && s.P[s.k - 1] > 0.0 && s.P[s.k + 1] > 0.0) {
    s.a = std::log(s.P[s.k - 1]);
    s.b = std::log(s.P[s.k]);
    s.c = std::log(s.P[s.k + 1]);
    const double d = s.a - 2.0 * s.b + s.c;
    if (d < 0.0) {
      const double delta = 0.5 * (s.a - s.c) / d;
      if (std::abs(delta) <= 0.5) {
        s.delta = delta;
        s.refined = true;
      } else {
        s.delta = std::clamp(delta, -0.5, 0.5);
      }
    }
  }
  return s;
}

}  // namespace

RateEstimate estimate_resp_rate(std::span<const double> y, double sample_rate, Band band) {
  const PeakSearch s = search_peak(y, sample_rate, band);
  RateEstimate r;
  r.peak_hz = (static_cast<double>(s.k) + s.delta) * sample_rate / static_cast<double>(s.nfft);
  r.rate_bpm = 60.0 * r.peak_hz;
  r.prominence = s.median > 0.0 ? s.P[s.k] / s.median : std::numeric_limits<double>::infinity();
  r.confident = r.prominence >= kProminenceThreshold;
  return r;
}

Series resp_rate_gradient(std::span<const double> y, double sample_rate, Band band) {
  const PeakSearch s = search_peak(y, sample_rate, band);
  const std::size_t n = y.size();
  Series grad(n, 0.0);
  if (!s.refined) return grad;
  const double d = s.a - 2.0 * s.b + s.c;
  const double d2 = d * d;
  // d delta / d log P at bins k-1, k, k+1.
  const std::array<double, 3> dlog{(s.c - s.b) / d2, (s.a - s.c) / d2, (s.b - s.a) / d2};
  const double scale = 60.0 * sample_rate / static_cast<double>(s.nfft);
  Series gz(n, 0.0);
  for (int off = -1; off <= 1; ++off) {
    const auto m = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(s.k) + off);
    const double coef = dlog[static_cast<std::size_t>(off + 1)] / s.P[m];
    const Complex zc = std::conj(s.Z[m]);
    const double step = -kTwoPi * static_cast<double>(m) / static_cast<double>(s.nfft);
    for (std::size_t t = 0; t < n; ++t) {
      const Complex e = std::polar(1.0, step * static_cast<double>(t));
      gz[t] += coef * 2.0 * (zc * e).real();
    }
  }
  for (std::size_t t = 0; t < n; ++t) gz[t] *= s.window[t];
  const double mu = mean(gz);
  for (std::size_t t = 0; t < n; ++t) grad[t] = scale * (gz[t] - mu);
  return grad;
}

// ---------------------------------------------------------------- pipeline

PtnParams PtnParams::identity() {
  PtnParams p;
  p.sdab_enabled = false;
  return p;
}

PtnParams PtnParams::initial(std::uint64_t seed) {
  PtnParams p;
  p.tmb = TmbParams::initial(seed);
  return p;
}

double sda_loss(const BandDistributions& bd, double nu_scale) {
  SinkhornOptions opt;
  opt.nu_scale = nu_scale;
  const double wb = sinkhorn(bd.p_b, bd.q_b, bd.freqs_b, bd.freqs_b, opt).objective;
  const double wo = sinkhorn(bd.p_o, bd.q_o, bd.freqs_o, bd.freqs_o, opt).objective;
  return wb + wo;
}

MonitorResult ptn_monitor(std::span<const double> y, double sample_rate, const PtnParams& params,
                          bool compute_sda_loss) {
  require(all_finite(y), "ptn_monitor: non-finite input");
  MonitorResult out;
  Series centered = remove_mean(y);
  if (params.sdab_enabled) {
    const StftConfig cfg = params.stft.fitted(centered.size());
    const Spectrogram spec = stft(centered, sample_rate, cfg);
    const BandDistributions bd = band_distributions(spec, params.band, params.theta_b);
    out.reconstructed = apply_mask_reconstruct(spec, reallocation_mask(bd));
    if (compute_sda_loss) {
      out.sda_loss = sda_loss(bd, params.nu_scale);
      out.has_sda_loss = true;
    }
  } else {
    out.reconstructed = std::move(centered);
  }
  out.refined = tmb_forward(out.reconstructed, params.tmb);
  out.rate = estimate_resp_rate(out.refined, sample_rate, params.band);
  return out;
}

Series theta_from_clean(const std::vector<Series>& segments, double sample_rate,
                        const StftConfig& stft_config, Band band) {
  require(!segments.empty(), "theta_from_clean: no segments");
  Series acc;
  for (const auto& s : segments) {
    const Series c = remove_mean(s);
    const Spectrogram spec = stft(c, sample_rate, stft_config.fitted(c.size()));
    const BandDistributions bd = band_distributions(spec, band);
    if (acc.empty()) acc.assign(bd.p_b.size(), 0.0);
    require(acc.size() == bd.p_b.size(), "theta_from_clean: inconsistent band sizes");
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += bd.p_b[i];
  }
  Series theta(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i)
    theta[i] = std::log(acc[i] / static_cast<double>(segments.size()) + 1e-12);
  return theta;
}

}  // namespace trurm
