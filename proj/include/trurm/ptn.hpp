#pragma once

#include <array>
#include <cstdint>

#include "trurm/common.hpp"

namespace trurm {

struct StftConfig {
  std::size_t window = 256;
  std::size_t hop = 64;
  std::size_t fft_size = 1024;

  void validate() const;
  /// Shrinks the window (hop = window / 4) when a series is shorter than it.
  StftConfig fitted(std::size_t length) const;
};

/// One-sided STFT, frames x (fft_size/2 + 1). Frames are centred: the series
/// is zero-padded by window/2 at the front.
struct Spectrogram {
  std::vector<Series> M;
  std::vector<Series> Phi;
  Series freqs;
  std::size_t window = 0;
  std::size_t hop = 0;
  std::size_t fft_size = 0;
  double sample_rate = 0.0;
  std::size_t signal_length = 0;

  std::size_t frames() const { return M.size(); }
  std::size_t bins() const { return freqs.size(); }
};

Spectrogram stft(std::span<const double> x, double sample_rate, const StftConfig& config = {});
/// Weighted overlap-add with sum-of-squared-window normalisation.
Series istft(const Spectrogram& spec);

/// Windowed time-domain energy of frame f.
double stft_frame_time_energy(std::span<const double> x, const StftConfig& config, std::size_t f);
/// (|X_0|^2 + 2 sum |X_k|^2 + |X_{N/2}|^2) / fft_size for frame f.
double stft_frame_spectral_energy(const Spectrogram& spec, std::size_t f);

struct BandDistributions {
  std::vector<std::size_t> F_b;
  std::vector<std::size_t> F_o;
  Series p_b;
  Series p_o;
  Series q_b;
  Series q_o;
  Series freqs_b;
  Series freqs_o;
  std::size_t n_bins = 0;
};

std::vector<std::size_t> band_bins(const Series& freqs, Band band);
Series softmax(std::span<const double> theta);

/// theta_b empty -> zeros (uniform q_b). All-zero band energy -> uniform p.
BandDistributions band_distributions(const Spectrogram& spec, Band band,
                                     std::span<const double> theta_b = {});

struct TransportPlan {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Series xi;  // row-major
  double cost = 0.0;
  double entropy = 0.0;  // -sum xi log xi
  double kl = 0.0;       // KL(xi || p q^T)
  double objective = 0.0;  // cost + nu * kl
  double nu = 0.0;
  std::size_t iters = 0;
  bool converged = false;
  bool log_domain = false;
  double marginal_error = 0.0;  // L1 over rows and columns
  Series dual_history;          // concave dual after each sweep; nondecreasing

  double at(std::size_t i, std::size_t j) const { return xi[i * cols + j]; }
};

struct SinkhornOptions {
  double nu = 0.0;  // <= 0: nu_scale * max(C)
  double nu_scale = 0.05;
  std::size_t max_iters = 500;
  double tol = 1e-6;
  bool force_log_domain = false;
};

TransportPlan sinkhorn(std::span<const double> p, std::span<const double> q,
                       std::span<const double> freqs_p, std::span<const double> freqs_q,
                       const SinkhornOptions& options = {});
/// Same with an explicit cost matrix (row-major, |p| x |q|).
TransportPlan sinkhorn_cost(std::span<const double> p, std::span<const double> q,
                            std::span<const double> cost, const SinkhornOptions& options = {});

inline constexpr double kMaskBandLow = 0.5;
inline constexpr double kMaskBandHigh = 2.0;
inline constexpr double kMaskOtherLow = 0.25;
inline constexpr double kMaskOtherHigh = 1.0;

/// Per-bin mask: clip(q/p) to [0.5, 2] on F_b and [0.25, 1] on F_o. Bins with
/// p = 0 take the upper bound on F_b and the lower bound on F_o.
Series reallocation_mask(const BandDistributions& bd);

Series apply_mask_reconstruct(const Spectrogram& spec, std::span<const double> mask);

struct TmbLayer {
  static constexpr std::size_t kChannels = 8;
  static constexpr std::size_t kHalf = kChannels / 2;
  static constexpr std::size_t kKernel = 5;

  std::array<std::array<double, kKernel>, kChannels> conv_w{};
  std::array<double, kChannels> conv_b{};
  std::array<double, kHalf> running_mean{};
  std::array<double, kHalf> running_var{1.0, 1.0, 1.0, 1.0};
  std::array<double, kHalf> mix_w{};
  double mix_b = 0.0;
  double residual_scale = 0.0;
};

struct TmbParams {
  std::vector<TmbLayer> layers;

  /// Two layers, small random conv/mix weights, residual_scale = 0.
  static TmbParams initial(std::uint64_t seed);
  /// Flat view of the trainable parameters (running stats excluded).
  Series flatten() const;
  void unflatten(std::span<const double> flat);
  std::size_t parameter_count() const;
};

inline constexpr double kBatchNormEps = 1e-5;

Series tmb_forward(std::span<const double> x, const TmbParams& params);
/// Analytic gradients of a scalar loss given dL/dY. Returns the gradient in
/// flatten() order; grad_input (optional) receives dL/dx.
Series tmb_backward(std::span<const double> x, const TmbParams& params,
                    std::span<const double> grad_output, Series* grad_input = nullptr);
/// Sets each layer's running statistics from the GLU outputs over inputs.
void tmb_calibrate_stats(TmbParams& params, const std::vector<Series>& inputs);

struct RateEstimate {
  double rate_bpm = 0.0;
  double peak_hz = 0.0;
  double prominence = 0.0;  // peak power / band median power
  bool confident = false;   // prominence >= 3
};

inline constexpr double kProminenceThreshold = 3.0;

/// Mean removal, Hann window, zero-padded FFT (>= 8192 points) restricted to
/// band, peak refined by a parabola through the log powers. Throws
/// NoRespiration when the band carries no energy.
RateEstimate estimate_resp_rate(std::span<const double> y, double sample_rate,
                                Band band = kRespirationBand);
/// d rate_bpm / d y (zero when the peak sits on a band edge).
Series resp_rate_gradient(std::span<const double> y, double sample_rate,
                          Band band = kRespirationBand);

struct PtnParams {
  Series theta_b;
  TmbParams tmb;
  StftConfig stft;
  Band band = kRespirationBand;
  double nu_scale = 0.05;
  bool sdab_enabled = true;

  /// SDAB off (mask = 1) and TMB at identity.
  static PtnParams identity();
  static PtnParams initial(std::uint64_t seed);
};

struct MonitorResult {
  RateEstimate rate;
  Series reconstructed;  // SDAB output (before TMB)
  Series refined;        // TMB output
  double sda_loss = 0.0;
  bool has_sda_loss = false;
};

MonitorResult ptn_monitor(std::span<const double> y, double sample_rate, const PtnParams& params,
                          bool compute_sda_loss = false);

/// W(p_b, q_b) + W(p_o, q_o).
double sda_loss(const BandDistributions& bd, double nu_scale = 0.05);

/// Average p_b over clean segments; log of it seeds theta_b.
Series theta_from_clean(const std::vector<Series>& segments, double sample_rate,
                        const StftConfig& stft = {}, Band band = kRespirationBand);

}  // namespace trurm
