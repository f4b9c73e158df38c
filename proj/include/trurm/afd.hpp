#pragma once

#include <array>

#include "trurm/common.hpp"
#include "trurm/preprocess.hpp"

namespace trurm {

/// Cascade of biquads; each row is {b0, b1, b2, 1, a1, a2}.
struct SosFilter {
  std::vector<std::array<double, 6>> sections;
};

/// Digital Butterworth bandpass (order poles per edge, 2*order total) via
/// prewarped bilinear transform. Unity gain at the band's center frequency.
SosFilter butterworth_bandpass(int order, double low_hz, double high_hz, double sample_rate);

Series sosfilt(const SosFilter& filter, std::span<const double> x);
/// Forward-backward filtering with odd-extension padding and steady-state
/// initial conditions. Zero phase; magnitude response squared.
Series sosfiltfilt(const SosFilter& filter, std::span<const double> x);
Complex sos_response(const SosFilter& filter, double freq_hz, double sample_rate);

struct BandSplit {
  Series x_re;  // in-band respiratory part
  Series x_ot;  // everything else; x_re + x_ot == segment - mean
};

BandSplit bandpass_butterworth(std::span<const double> segment, double sample_rate, Band band,
                               int order = 4);
BandSplit bandpass_butterworth(const PhaseSegment& segment, Band band, int order = 4);

enum class VmdInit { Uniform, Zero };

struct VmdParams {
  std::size_t K = 4;
  double penalty_alpha = 2000.0;
  double tau = 0.0;
  double tol = 1e-6;
  std::size_t max_iters = 500;
  VmdInit init = VmdInit::Uniform;

  void validate() const;
};

struct VmdMode {
  Series u;
  double center_hz = 0.0;
};

struct VmdResult {
  std::vector<VmdMode> modes;  // ascending center frequency
  std::size_t iterations = 0;
  bool converged = false;
};

/// Variational mode decomposition (Wiener-filter mode updates, power-weighted
/// center frequencies, dual ascent with step tau) on the mirror-extended signal.
/// The bandwidth penalty is alpha * (f - f_k)^2 with f in cycles per sample.
VmdResult vmd_decompose(std::span<const double> x, double sample_rate, const VmdParams& params);

struct ComponentSplit {
  Series x_ure;
  Series x_pd;
  std::size_t ure_mode = 0;
};

/// x_ure is the mode with the most energy inside band (ties: lower center
/// frequency). x_pd is the sum of the remaining modes; when x_re is given,
/// x_pd = x_re - x_ure so the VMD residual stays with the personal part.
ComponentSplit split_components(const std::vector<VmdMode>& modes, double sample_rate, Band band,
                                std::span<const double> x_re = {});

struct AfdConfig {
  Band band = kRespirationBand;
  int filter_order = 4;
  VmdParams vmd;
};

struct DecomposedSignal {
  Series x_ure;
  Series x_pd;
  Series x_ot;
  std::vector<VmdMode> modes;
  std::size_t ure_mode = 0;
  double sample_rate = 20.0;
  bool vmd_converged = false;

  std::size_t size() const { return x_ure.size(); }
  /// x_ure + x_pd + x_ot, summed in that order.
  Series recombined() const;
  Series x_re() const;
};

DecomposedSignal decompose(std::span<const double> segment, double sample_rate,
                           const AfdConfig& config = {});

}  // namespace trurm
