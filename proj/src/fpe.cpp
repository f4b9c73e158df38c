#include "trurm/fpe.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <mutex>
#include <random>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <openssl/evp.h>

#include "trurm/dtw.hpp"
#include "trurm/fft.hpp"
#include "trurm/hilbert.hpp"

namespace trurm {

namespace {

using Wide = boost::multiprecision::number<
    boost::multiprecision::cpp_bin_float<EncryptionKey::kMaxBits + 128,
                                         boost::multiprecision::digit_base_2>>;

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

// frac(seed * w / (2 pi)) for both noise multipliers.
struct NoiseTurns {
  double r1 = 0.0;
  double r2 = 0.0;
};

NoiseTurns noise_turns(const BigUint& seed) {
  static std::mutex mu;
  static std::map<BigUint, NoiseTurns> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    if (auto it = cache.find(seed); it != cache.end()) return it->second;
  }
  const Wide two_pi = 2 * boost::math::constants::pi<Wide>();
  const Wide w1 = (1 + boost::multiprecision::sqrt(Wide(5))) / 2;
  const Wide w2 = boost::multiprecision::sqrt(Wide(2));
  const Wide s(seed);
  auto turns = [&](const Wide& w) {
    Wide v = s * w / two_pi;
    v -= boost::multiprecision::floor(v);
    return static_cast<double>(v);
  };
  NoiseTurns out{turns(w1), turns(w2)};
  std::lock_guard<std::mutex> lock(mu);
  if (cache.size() > 4096) cache.clear();
  cache.emplace(seed, out);
  return out;
}

// Indices of one-sided bins outside band.
std::vector<std::size_t> out_of_band_bins(std::size_t n, double sample_rate, Band band) {
  std::vector<std::size_t> bins;
  for (std::size_t k = 0; k <= n / 2; ++k)
    if (!band.contains(bin_frequency(k, n, sample_rate))) bins.push_back(k);
  return bins;
}

std::vector<std::size_t> in_band_bins(std::size_t n, double sample_rate, Band band) {
  std::vector<std::size_t> bins;
  for (std::size_t k = 0; k <= n / 2; ++k)
    if (band.contains(bin_frequency(k, n, sample_rate))) bins.push_back(k);
  return bins;
}

// Adds sign * keyed noise to the out-of-band bins of x and returns the result.
Series keyed_noise_pass(std::span<const double> x, const EncryptionKey& key, double alpha_f,
                        Band band, double sample_rate, double sign) {
  const std::size_t n = x.size();
  ComplexSeries spec = rfft(x);
  const auto bins = out_of_band_bins(n, sample_rate, band);
  const BigUint seed = derive_seed(key);
  const Series re = gen_amp_noise(seed, bins.size(), alpha_f);
  const Series im = gen_amp_noise(seed + (BigUint(1) << key.size()), bins.size(), alpha_f);
  for (std::size_t j = 0; j < bins.size(); ++j) {
    const std::size_t k = bins[j];
    const bool self_conjugate = k == 0 || (n % 2 == 0 && k == n / 2);
    spec[k] += sign * Complex{re[j], self_conjugate ? 0.0 : im[j]};
    if (!self_conjugate) spec[n - k] = std::conj(spec[k]);
  }
  return ifft_real(spec);
}

}  // namespace

EncryptionKey::EncryptionKey(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
  require(bits_.size() >= kMinBits && bits_.size() <= kMaxBits,
          "EncryptionKey: length must be in [8, 1024] bits");
  for (auto b : bits_) require(b <= 1, "EncryptionKey: bits must be 0 or 1");
}

EncryptionKey EncryptionKey::from_hex(std::string_view hex) {
  while (!hex.empty() && std::isspace(static_cast<unsigned char>(hex.back()))) hex.remove_suffix(1);
  while (!hex.empty() && std::isspace(static_cast<unsigned char>(hex.front()))) hex.remove_prefix(1);
  std::vector<std::uint8_t> bits;
  bits.reserve(hex.size() * 4);
  for (char c : hex) {
    const int v = hex_value(c);
    if (v < 0) fail(ErrorCode::Format, "EncryptionKey: invalid hex digit");
    for (int b = 0; b < 4; ++b) bits.push_back(static_cast<std::uint8_t>((v >> b) & 1));
  }
  return EncryptionKey(std::move(bits));
}

EncryptionKey EncryptionKey::from_seed(std::size_t length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::uint8_t> bits(length);
  for (auto& b : bits) b = static_cast<std::uint8_t>(rng() & 1u);
  return EncryptionKey(std::move(bits));
}

std::string EncryptionKey::to_hex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  for (std::size_t i = 0; i < bits_.size(); i += 4) {
    int v = 0;
    for (std::size_t b = 0; b < 4 && i + b < bits_.size(); ++b) v |= bits_[i + b] << b;
    out.push_back(kDigits[v]);
  }
  return out;
}

std::string EncryptionKey::fingerprint() const {
  const std::string hex = to_hex();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(hex.data(), hex.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    fail(ErrorCode::Numeric, "fingerprint: SHA-256 failed");
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < 4; ++i) {
    out.push_back(kDigits[digest[i] >> 4]);
    out.push_back(kDigits[digest[i] & 0xf]);
  }
  return out;
}

EncryptionKey EncryptionKey::flipped(std::size_t bit) const {
  require(bit < bits_.size(), "EncryptionKey::flipped: bit out of range");
  auto bits = bits_;
  bits[bit] ^= 1u;
  return EncryptionKey(std::move(bits));
}

void PerturbationParams::validate(std::size_t key_length) const {
  require(std::isfinite(beta_amp) && beta_amp >= 0, "PerturbationParams: beta_amp must be >= 0");
  require(std::isfinite(beta_phase) && beta_phase >= 0,
          "PerturbationParams: beta_phase must be >= 0");
  require(epsilon_margin < key_length, "PerturbationParams: epsilon must be < key length");
}

BigUint derive_seed(const EncryptionKey& key) {
  BigUint g = 0;
  for (std::size_t i = key.size(); i-- > 0;) {
    g <<= 1;
    if (key.bit(i)) g |= 1;
  }
  return g;
}

Series gen_amp_noise(const BigUint& seed, std::size_t n_bins, double alpha_f) {
  require(n_bins >= 1, "gen_amp_noise: n_bins must be >= 1");
  require(alpha_f >= 0, "gen_amp_noise: alpha_f must be >= 0");
  const NoiseTurns t = noise_turns(seed);
  Series out(n_bins);
  for (std::size_t n = 0; n < n_bins; ++n) {
    const double m = static_cast<double>(n + 1);
    const double a1 = kTwoPi * std::fmod(m * t.r1, 1.0);
    const double a2 = kTwoPi * std::fmod(m * t.r2, 1.0);
    out[n] = alpha_f * std::sin(a1) * std::cos(a2);
  }
  return out;
}

double adaptive_intensity(std::span<const Complex> band_spectrum, double beta) {
  require(!band_spectrum.empty(), "adaptive_intensity: empty band");
  double acc = 0.0;
  for (const Complex& c : band_spectrum) acc += std::norm(c);
  return beta * std::sqrt(acc / static_cast<double>(band_spectrum.size()));
}

AmpPerturbation apply_amp_perturbation(std::span<const double> x_ot, const EncryptionKey& key,
                                       double beta_amp, Band band, double sample_rate) {
  require(!x_ot.empty(), "apply_amp_perturbation: empty input");
  require(all_finite(x_ot), "apply_amp_perturbation: non-finite input");
  require(beta_amp >= 0, "apply_amp_perturbation: beta_amp must be >= 0");
  const ComplexSeries spec = rfft(x_ot);
  const auto bins = out_of_band_bins(x_ot.size(), sample_rate, band);
  AmpPerturbation out;
  if (bins.empty() || beta_amp == 0.0) {
    out.output.assign(x_ot.begin(), x_ot.end());
    return out;
  }
  ComplexSeries band_spec;
  band_spec.reserve(bins.size());
  for (auto k : bins) band_spec.push_back(spec[k]);
  out.alpha_f = adaptive_intensity(band_spec, beta_amp);
  out.output = keyed_noise_pass(x_ot, key, out.alpha_f, band, sample_rate, 1.0);
  return out;
}

Series remove_amp_perturbation(std::span<const double> x_ot_enc, const EncryptionKey& key,
                               double alpha_f, Band band, double sample_rate) {
  require(!x_ot_enc.empty(), "remove_amp_perturbation: empty input");
  if (alpha_f == 0.0 || out_of_band_bins(x_ot_enc.size(), sample_rate, band).empty())
    return Series(x_ot_enc.begin(), x_ot_enc.end());
  return keyed_noise_pass(x_ot_enc, key, alpha_f, band, sample_rate, -1.0);
}

double phase_window(double t, double T_res) {
  require(T_res > 0, "phase_window: T_res must be positive");
  const double eta = T_res / 4.0;
  return std::exp(-t * t / (2.0 * eta * eta));
}

double phase_perturbation_fn(const EncryptionKey& key, double t, double segment_duration,
                             double T_res) {
  require(segment_duration > 0, "phase_perturbation_fn: duration must be positive");
  const double dt = segment_duration / static_cast<double>(key.size());
  double phi = 0.0;
  double height = kPi;
  for (std::size_t i = 0; i < key.size(); ++i, height *= 0.5)
    if (key.bit(i)) phi += height * phase_window(t - static_cast<double>(i) * dt, T_res);
  return phi;
}

namespace {

Series phase_track(const EncryptionKey& key, std::size_t n, double sample_rate, double T_res) {
  const double duration = static_cast<double>(n) / sample_rate;
  Series phi(n);
  for (std::size_t i = 0; i < n; ++i)
    phi[i] = phase_perturbation_fn(key, static_cast<double>(i) / sample_rate, duration, T_res);
  return phi;
}

}  // namespace

PhasePerturbation apply_phase_perturbation(std::span<const double> x_pd, const EncryptionKey& key,
                                           double beta_phase, double T_res, double sample_rate,
                                           Band band) {
  require(all_finite(x_pd), "apply_phase_perturbation: non-finite input");
  require(beta_phase >= 0, "apply_phase_perturbation: beta_phase must be >= 0");
  require(sample_rate > 0, "apply_phase_perturbation: sample rate must be positive");
  const std::size_t n = x_pd.size();
  PhasePerturbation out;
  out.x_enc_analytic = hilbert_analytic(x_pd);
  const ComplexSeries spec = rfft(x_pd);
  ComplexSeries band_spec;
  for (auto k : in_band_bins(n, sample_rate, band)) band_spec.push_back(spec[k]);
  out.gamma_f = band_spec.empty() ? 0.0 : adaptive_intensity(band_spec, beta_phase);

  out.output.assign(x_pd.begin(), x_pd.end());
  if (out.gamma_f == 0.0) return out;
  const Series phi = phase_track(key, n, sample_rate, T_res);
  for (std::size_t i = 0; i < n; ++i) {
    const Complex a = out.x_enc_analytic[i];
    const Complex rot = std::polar(1.0, out.gamma_f * phi[i]);
    // x + Re(a (rot - 1)) keeps the gamma = 0 limit exact.
    out.output[i] = x_pd[i] + (a * (rot - 1.0)).real();
    out.x_enc_analytic[i] = a * rot;
  }
  return out;
}

double estimate_t_res(std::span<const double> x, double sample_rate, Band band) {
  require(!x.empty() && sample_rate > 0, "estimate_t_res: empty input");
  const std::size_t nfft = std::max<std::size_t>(4096, next_pow2(x.size()));
  const ComplexSeries spec = rfft(remove_mean(x), nfft);
  double best = 0.0;
  double f_peak = 0.0;
  for (std::size_t k = 1; k <= nfft / 2; ++k) {
    const double f = bin_frequency(k, nfft, sample_rate);
    if (!band.contains(f)) continue;
    const double p = std::norm(spec[k]);
    if (p > best) {
      best = p;
      f_peak = f;
    }
  }
  if (best <= 0.0) return 10.0;
  return std::clamp(1.0 / f_peak, 2.0, 10.0);
}

EncryptedSegment encrypt_segment(const DecomposedSignal& d, const EncryptionKey& key,
                                 const PerturbationParams& params, double t_res, Band band) {
  params.validate(key.size());
  const std::size_t n = d.size();
  require(n >= 4 && d.x_pd.size() == n && d.x_ot.size() == n,
          "encrypt_segment: inconsistent decomposition");
  const double fs = d.sample_rate;

  EncryptedSegment enc;
  enc.sample_rate = fs;
  enc.key_fingerprint = key.fingerprint();
  enc.key_length = key.size();
  enc.epsilon_margin = params.epsilon_margin;
  enc.t_res = t_res > 0 ? t_res : estimate_t_res(d.x_ure, fs, band);

  PhasePerturbation phase =
      apply_phase_perturbation(d.x_pd, key, params.beta_phase, enc.t_res, fs, band);
  AmpPerturbation amp = apply_amp_perturbation(d.x_ot, key, params.beta_amp, band, fs);
  enc.gamma_f = phase.gamma_f;
  enc.alpha_f = amp.alpha_f;

  Series in_band_enc(n);
  Series x_re(n);
  enc.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    in_band_enc[i] = d.x_ure[i] + phase.output[i];
    x_re[i] = d.x_ure[i] + d.x_pd[i];
    enc.y[i] = in_band_enc[i] + amp.output[i];
  }
  enc.dtw_score = dtw_distance(envelope(in_band_enc), envelope(x_re));
  enc.x_ure = d.x_ure;
  enc.x_enc_analytic = std::move(phase.x_enc_analytic);
  enc.x_ot_enc = std::move(amp.output);
  return enc;
}

DecomposedSignal decrypt_segment(const EncryptedSegment& enc, const EncryptionKey& key, Band band) {
  const std::size_t n = enc.size();
  require(n >= 4 && enc.x_ure.size() == n && enc.x_enc_analytic.size() == n &&
              enc.x_ot_enc.size() == n,
          "decrypt_segment: inconsistent encrypted segment");
  require(key.size() == enc.key_length, "decrypt_segment: key length mismatch");
  const double fs = enc.sample_rate;

  DecomposedSignal d;
  d.sample_rate = fs;
  d.x_ure = enc.x_ure;
  d.x_pd.resize(n);
  if (enc.gamma_f == 0.0) {
    for (std::size_t i = 0; i < n; ++i) d.x_pd[i] = enc.x_enc_analytic[i].real();
  } else {
    const Series phi = phase_track(key, n, fs, enc.t_res);
    for (std::size_t i = 0; i < n; ++i)
      d.x_pd[i] = (enc.x_enc_analytic[i] * std::polar(1.0, -enc.gamma_f * phi[i])).real();
  }
  d.x_ot = remove_amp_perturbation(enc.x_ot_enc, key, enc.alpha_f, band, fs);
  return d;
}

IrreversibilityBudget irreversibility_budget(std::size_t key_length, std::size_t epsilon_margin) {
  require(key_length >= EncryptionKey::kMinBits, "irreversibility_budget: key too short");
  require(epsilon_margin < key_length, "irreversibility_budget: epsilon must be < key length");
  IrreversibilityBudget b;
  b.bits = key_length - epsilon_margin;
  b.brute_force_attempts = BigUint(1) << b.bits;
  return b;
}

IrreversibilityBudget irreversibility_budget(const EncryptionKey& key,
                                             std::size_t epsilon_margin) {
  return irreversibility_budget(key.size(), epsilon_margin);
}

}  // namespace trurm
