#pragma once

#include <optional>

#include "trurm/common.hpp"
#include "trurm/signal_sim.hpp"

namespace trurm {

/// Dense row-major complex matrix (slow time x range bin).
struct ComplexMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  ComplexSeries data;

  ComplexMatrix() = default;
  ComplexMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c) {}
  Complex& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const Complex& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct TargetBin {
  std::size_t bin_index = 0;
  double range_m = 0.0;
  double mean_magnitude = 0.0;
};

/// Fixed-length slow-time phase window (radians, unwrapped).
struct PhaseSegment {
  Series phase;
  double sample_rate = 20.0;
  double start_time = 0.0;
  std::string source_id;
  std::size_t segment_index = 0;
  // Filled from simulator ground truth when available.
  int label = -1;
  std::optional<double> truth_bpm;

  double duration() const { return static_cast<double>(phase.size()) / sample_rate; }
};

struct PreprocessConfig {
  double window_s = 20.0;
  double overlap = 0.5;
  std::size_t exclude_dc_bins = 2;
};

/// Chirp-averaged fast-time FFT per frame; one output row per frame.
ComplexMatrix range_fft(const RadarCube& cube);

/// Argmax of time-averaged magnitude over bins >= exclude_dc_bins; ties go to
/// the smaller index. range_resolution only fills TargetBin::range_m.
TargetBin select_target_bin(const ComplexMatrix& rfft, std::size_t exclude_dc_bins = 2,
                            double range_resolution = 0.0);

/// atan2 per slow-time sample, in (-pi, pi]. A zero sample has phase 0.
Series extract_phase(const ComplexMatrix& rfft, const TargetBin& bin);

/// Adds multiples of 2 pi wherever consecutive samples jump by more than pi.
Series unwrap_phase(std::span<const double> wrapped);

std::vector<PhaseSegment> segment(std::span<const double> phase, double sample_rate,
                                  double window_s, double overlap_frac,
                                  const std::string& source_id = {});

/// Sets label and truth_bpm (60 x mean instantaneous rate over the window).
void attach_truth(std::vector<PhaseSegment>& segments, const GroundTruth& truth);

/// range_fft -> select_target_bin -> extract_phase -> unwrap_phase.
Series cube_to_phase(const RadarCube& cube, std::size_t exclude_dc_bins = 2,
                     TargetBin* target = nullptr);

}  // namespace trurm
