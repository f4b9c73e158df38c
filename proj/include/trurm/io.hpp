#pragma once

#include <string>

#include "trurm/adversary.hpp"
#include "trurm/cohort.hpp"
#include "trurm/fpe.hpp"
#include "trurm/ptn.hpp"
#include "trurm/signal_sim.hpp"

namespace trurm {

/// Writes bytes to path through a temporary file and rename, so a failed write
/// never leaves a partial output behind.
void write_file_atomic(const std::string& path, std::string_view bytes);
std::string read_file(const std::string& path);

// JSON documents for configuration inputs.
RadarConfig radar_config_from_json(const std::string& text);
std::string radar_config_to_json(const RadarConfig& config);
PersonaProfile persona_from_json(const std::string& text);
std::string persona_to_json(const PersonaProfile& persona);
CohortConfig cohort_config_from_json(const std::string& text);
std::string cohort_config_to_json(const CohortConfig& config);

/// Cube payload at path (interleaved float32 I/Q, little endian, frame-chirp-
/// sample order) with config and truth in path + ".json".
void write_cube(const std::string& path, const RadarCube& cube);
RadarCube read_cube(const std::string& path);

/// Segment file: one JSON header line, then every segment's phase as packed
/// little-endian float64 in header order.
void write_segments(const std::string& path, const std::vector<PhaseSegment>& segments);
std::vector<PhaseSegment> read_segments(const std::string& path);

/// Decomposition file: header with AFD parameters and per-segment metadata and
/// center frequencies; payload x_ure, x_pd, x_ot, then the K modes per segment.
void write_decompositions(const std::string& path, const std::vector<CohortSample>& samples,
                          const AfdConfig& config);
std::vector<CohortSample> read_decompositions(const std::string& path, AfdConfig* config = nullptr);

/// Segment metadata carried into encrypted files.
struct EncryptedRecord {
  PhaseSegment meta;  // phase left empty
  EncryptedSegment enc;
  bool test = false;
};

/// Encrypted file: header with L, epsilon, beta values, per-segment alpha_f,
/// gamma_f, dtw_score, T_res and the key fingerprint; payload is y only.
void write_encrypted(const std::string& path, const std::vector<EncryptedRecord>& records,
                     const PerturbationParams& params);
std::vector<EncryptedRecord> read_encrypted(const std::string& path);

/// Any series file (segments, decompositions or encrypted) as the signal the
/// monitor and adversary see: phase, recombined components, or y.
struct LabeledSeries {
  Series y;
  double sample_rate = 20.0;
  double start_time = 0.0;
  std::size_t segment_index = 0;
  int label = -1;
  std::optional<double> truth_bpm;
  bool test = false;
};
std::vector<LabeledSeries> read_series_file(const std::string& path);

std::string ptn_params_to_json(const PtnParams& params);
PtnParams ptn_params_from_json(const std::string& text);

struct RateRow {
  std::size_t segment_index = 0;
  double start_time_s = 0.0;
  double rate_bpm = 0.0;
  std::optional<double> truth_bpm;
  double peak_prominence = 0.0;
};
std::string rates_to_csv(const std::vector<RateRow>& rows);
std::vector<RateRow> rates_from_csv(const std::string& text);

std::string attack_report_to_json(const AttackReport& report);
AttackReport attack_report_from_json(const std::string& text);

/// Key file: hex digits, surrounding whitespace ignored.
EncryptionKey read_key_file(const std::string& path);

}  // namespace trurm
