#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include "trurm/afd.hpp"
#include "trurm/common.hpp"

namespace trurm {

using BigUint = boost::multiprecision::cpp_int;

/// Binary key k_0..k_{L-1}. Hex form: L/4 lowercase digits, bit i is bit
/// (i mod 4) of digit floor(i/4).
class EncryptionKey {
public:
  static constexpr std::size_t kMinBits = 8;
  static constexpr std::size_t kMaxBits = 1024;

  EncryptionKey() = default;
  explicit EncryptionKey(std::vector<std::uint8_t> bits);

  static EncryptionKey from_hex(std::string_view hex);
  /// Deterministic pseudo-random key (test and simulation use only).
  static EncryptionKey from_seed(std::size_t length, std::uint64_t seed);

  std::string to_hex() const;
  /// First 8 hex digits of SHA-256 over to_hex().
  std::string fingerprint() const;
  EncryptionKey flipped(std::size_t bit) const;

  std::size_t size() const { return bits_.size(); }
  bool bit(std::size_t i) const { return bits_.at(i) != 0; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }
  bool operator==(const EncryptionKey& other) const = default;

private:
  std::vector<std::uint8_t> bits_;
};

struct PerturbationParams {
  double beta_amp = 1.0;
  double beta_phase = 1.0;
  std::size_t epsilon_margin = 32;
  double delta_A = 0.0;

  void validate(std::size_t key_length) const;
};

/// Gamma(k) = sum k_i 2^i, exact.
BigUint derive_seed(const EncryptionKey& key);

/// N[n] = alpha * sin(seed w1 (n+1)) * cos(seed w2 (n+1)), w1 = golden ratio,
/// w2 = sqrt(2). Angles are reduced modulo 2 pi in extended precision so huge
/// seeds stay exact.
Series gen_amp_noise(const BigUint& seed, std::size_t n_bins, double alpha_f);

/// beta * sqrt(mean |X|^2) over the given bins.
double adaptive_intensity(std::span<const Complex> band_spectrum, double beta);

struct AmpPerturbation {
  Series output;
  double alpha_f = 0.0;
};

/// Keyed noise on every one-sided DFT bin outside band (real part from seed
/// Gamma, imaginary part from Gamma + 2^L); Hermitian symmetry enforced,
/// in-band bins untouched. alpha_f = beta * RMS of the perturbed bins' spectrum.
AmpPerturbation apply_amp_perturbation(std::span<const double> x_ot, const EncryptionKey& key,
                                       double beta_amp, Band band, double sample_rate);

/// Inverse of apply_amp_perturbation for a known alpha_f.
Series remove_amp_perturbation(std::span<const double> x_ot_enc, const EncryptionKey& key,
                               double alpha_f, Band band, double sample_rate);

/// exp(-t^2 / (2 eta^2)), eta = T_res / 4.
double phase_window(double t, double T_res);

/// phi(k, t) = sum_i k_i (pi / 2^i) g(t - i dt), dt = segment_duration / L.
double phase_perturbation_fn(const EncryptionKey& key, double t, double segment_duration,
                             double T_res);

struct PhasePerturbation {
  Series output;                 // Re(x_enc_analytic)
  ComplexSeries x_enc_analytic;  // hilbert(x_pd) * exp(j gamma phi)
  double gamma_f = 0.0;
};

PhasePerturbation apply_phase_perturbation(std::span<const double> x_pd, const EncryptionKey& key,
                                           double beta_phase, double T_res, double sample_rate,
                                           Band band = kRespirationBand);

/// 1 / (in-band spectral peak of x), clamped to [2, 10] s. Silent input -> 10 s.
double estimate_t_res(std::span<const double> x, double sample_rate, Band band = kRespirationBand);

struct EncryptedSegment {
  Series y;
  std::string key_fingerprint;
  std::size_t key_length = 0;
  std::size_t epsilon_margin = 0;
  double dtw_score = 0.0;
  double gamma_f = 0.0;
  double alpha_f = 0.0;
  double t_res = 0.0;
  double sample_rate = 20.0;
  // Internal parts kept for the exact inversion path.
  Series x_ure;
  ComplexSeries x_enc_analytic;
  Series x_ot_enc;

  std::size_t size() const { return y.size(); }
};

/// t_res <= 0 estimates T_res from x_ure.
EncryptedSegment encrypt_segment(const DecomposedSignal& d, const EncryptionKey& key,
                                 const PerturbationParams& params, double t_res = 0.0,
                                 Band band = kRespirationBand);

/// Undoes both perturbations with a candidate key. Exact for the true key.
DecomposedSignal decrypt_segment(const EncryptedSegment& enc, const EncryptionKey& key,
                                 Band band = kRespirationBand);

struct IrreversibilityBudget {
  std::size_t bits = 0;
  BigUint brute_force_attempts;
};

IrreversibilityBudget irreversibility_budget(std::size_t key_length, std::size_t epsilon_margin);
IrreversibilityBudget irreversibility_budget(const EncryptionKey& key,
                                             std::size_t epsilon_margin);

}  // namespace trurm
