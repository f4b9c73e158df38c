#pragma once

#include <optional>

#include "trurm/afd.hpp"
#include "trurm/preprocess.hpp"
#include "trurm/signal_sim.hpp"

namespace trurm {

enum class BreathingPattern { Natural, Deep, Irregular };

std::string pattern_name(BreathingPattern p);
BreathingPattern parse_pattern(std::string_view name);

/// natural: unchanged; deep: 2x amplitude, 0.8x rate; irregular: 20% per-cycle
/// rate jitter and 20% amplitude jitter.
PersonaProfile apply_pattern(const PersonaProfile& persona, BreathingPattern pattern);

/// Slow-time SNR at the target bin: ref_snr_db at ref_distance, falling as d^-4.
double snr_db_at(double distance_m, double ref_snr_db = 20.0, double ref_distance_m = 0.5);
/// Per-component IQ noise std giving snr_db after chirp averaging and the range
/// FFT, for a unit-amplitude target.
double noise_std_for_snr(double snr_db, const RadarConfig& config);

struct CohortConfig {
  std::size_t personas = 13;
  std::size_t sessions = 15;  // per persona
  double session_s = 120.0;
  double window_s = 20.0;
  double overlap = 0.5;
  double distance_m = 0.5;
  BreathingPattern pattern = BreathingPattern::Natural;
  double ref_snr_db = 20.0;
  double ref_distance_m = 0.5;
  // Session-to-session drift of each persona's rate and depth.
  double session_rate_jitter = 0.15;
  double session_amp_jitter = 0.30;
  double test_fraction = 0.2;
  std::uint64_t seed = 1;
  RadarConfig radar = RadarConfig::compact();
  AfdConfig afd;

  void validate() const;
};

struct CohortSample {
  PhaseSegment segment;
  DecomposedSignal decomposition;
  std::size_t session = 0;
  bool test = false;
};

struct Cohort {
  CohortConfig config;
  std::vector<CohortSample> samples;

  std::vector<std::size_t> train_indices() const;
  std::vector<std::size_t> test_indices() const;
};

/// Simulates every (persona, session) capture through the radar model,
/// preprocesses and decomposes each window. Sessions are split train/test per
/// persona, so overlapping windows never straddle the split.
Cohort build_cohort(const CohortConfig& config);

}  // namespace trurm
