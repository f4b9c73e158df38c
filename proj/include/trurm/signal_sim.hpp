#pragma once

#include <optional>

#include "trurm/common.hpp"

namespace trurm {

/// FMCW acquisition parameters. Defaults follow the AWR1843 capture profile
/// (77 GHz start, 4 GHz sweep, 256 samples x 128 chirps, 50 ms frames).
struct RadarConfig {
  double start_frequency_hz = 77e9;
  double bandwidth_hz = 4e9;
  std::size_t samples_per_chirp = 256;
  std::size_t chirps_per_frame = 128;
  double frame_period_s = 0.05;
  double chirp_cycle_time_s = 50e-6;
  double adc_rate_hz = 8e6;

  double range_resolution() const { return kSpeedOfLight / (2.0 * bandwidth_hz); }
  double slow_time_rate() const { return 1.0 / frame_period_s; }
  double wavelength() const { return kSpeedOfLight / start_frequency_hz; }
  double max_range() const {
    return static_cast<double>(samples_per_chirp) * range_resolution();
  }
  void validate() const;

  /// Same RF front end with 64 samples/chirp and 2 chirps/frame. Keeps range
  /// resolution and slow-time rate; used for long cohort captures.
  static RadarConfig compact();
};

struct HarmonicTerm {
  int order = 2;
  double ratio = 0.0;  // amplitude relative to the fundamental
  double phase_rad = 0.0;
};

/// Breathing subject. Morphology comes from the harmonic series plus an
/// asymmetric inhale/exhale time warp of each cycle.
struct PersonaProfile {
  int id_label = 0;
  double resp_rate_hz = 0.25;
  double resp_amplitude_m = 0.002;
  std::vector<HarmonicTerm> harmonics;
  double inhale_exhale_ratio = 1.0;
  double heart_rate_hz = 1.2;
  double heart_amplitude_m = 0.0;
  double micromotion_std_m = 0.0;
  double base_range_m = 0.5;
  // Per-cycle fractional jitter (0 = regular breathing).
  double rate_jitter = 0.0;
  double amplitude_jitter = 0.0;

  void validate() const;
};

/// Chest motion on the slow-time grid with the instantaneous breathing rate.
struct ChestMotion {
  Series displacement_m;
  Series resp_rate_hz;
  double sample_rate = 20.0;
};

struct GroundTruth {
  Series displacement_m;
  Series resp_rate_hz;
  int id_label = -1;
};

/// Complex IQ samples, row-major (frame, chirp, sample).
struct RadarCube {
  RadarConfig config;
  std::size_t frames = 0;
  std::vector<std::complex<float>> iq;
  std::optional<GroundTruth> truth;

  std::complex<float> at(std::size_t frame, std::size_t chirp, std::size_t sample) const {
    return iq[(frame * config.chirps_per_frame + chirp) * config.samples_per_chirp + sample];
  }
  void validate() const;
};

ChestMotion synth_displacement(const PersonaProfile& persona, double duration_s,
                               double slow_rate_hz, std::uint64_t seed);

/// Beat signal per chirp: tone at bin round(R/range_resolution), phase 4 pi R / lambda,
/// with R = base_range + displacement. Complex Gaussian noise of std
/// range_noise_std per component is added to every IQ sample.
RadarCube synth_radar_cube(std::span<const double> displacement_m, double base_range_m,
                           const RadarConfig& config, double range_noise_std,
                           std::uint64_t seed);

/// Displacement + cube with ground truth attached.
RadarCube simulate_capture(const PersonaProfile& persona, const RadarConfig& config,
                           double duration_s, double range_noise_std, std::uint64_t seed);

/// Thirteen personas with distinct morphology; rates and amplitudes overlap.
std::vector<PersonaProfile> default_cohort(std::size_t count = 13);

}  // namespace trurm
