#pragma once

#include "trurm/adversary.hpp"
#include "trurm/cohort.hpp"
#include "trurm/fpe.hpp"
#include "trurm/ptn.hpp"

namespace trurm {

struct LossWeights {
  double lambda_id = 1.0;
  double lambda_r = 1.0;
  double lambda_s = 0.1;
  double lambda_mor = 0.01;
  double lambda_w = 0.1;

  void validate() const;
};

/// Mean negative log-likelihood of the true class; log argument clamped at 1e-12.
double loss_id(const std::vector<Series>& probs, const std::vector<std::size_t>& labels);
/// Mean absolute rate error (bpm).
double loss_r(std::span<const double> pred_bpm, std::span<const double> true_bpm);
/// W(p_b, q_b) + W(p_o, q_o).
double loss_sda(const BandDistributions& bd, double nu_scale = 0.05);
/// DTW between Hilbert envelopes plus lambda_w * mean |grad original - grad
/// encrypted| (central differences, index-paired).
double loss_mor(std::span<const double> original, std::span<const double> encrypted,
                double lambda_w);

struct LossComponents {
  double id = 0.0;
  double r = 0.0;
  double sda = 0.0;
  double mor = 0.0;
};

/// lambda_r L_r + lambda_s L_SDA + lambda_mor L_mor - lambda_id L_id.
double total_loss(const LossComponents& c, const LossWeights& w);

struct PipelineConfig {
  EncryptionKey key = EncryptionKey::from_seed(16, 0x6b6579);
  // delta_A is the minimum mean envelope DTW a selected grid point must reach.
  PerturbationParams perturbation{1.0, 1.0, 4, 50.0};
  PtnParams ptn;
  TrainingMeta adversary;
  LossWeights weights;
  double mae_budget_bpm = 1.5;
  double std_budget_bpm = 0.5;
  // Segments used for the Sinkhorn loss estimate (evenly spaced over the test split).
  std::size_t sda_samples = 32;
};

/// Per-sample outputs of one pass over the cohort.
struct PipelineRun {
  bool encrypted = false;
  Series pred_bpm;
  Series true_bpm;
  Series prominence;
  Series dtw;
  std::vector<Series> signals;  // y per sample
  std::vector<Series> in_band;  // x_ure + Re(x_enc) per sample (encrypted runs)
  AttackReport attack;          // adversary retrained on the train split
  std::vector<int> test_labels;
  double loss_id = 0.0;
};

/// encrypted = false runs the clean recombined signal through the same PTN and
/// adversary. Rates and DTW cover every sample; IRAC covers the test split.
PipelineRun run_pipeline(const Cohort& cohort, const PipelineConfig& config, bool encrypted);

struct PointEvaluation {
  double beta_amp = 0.0;
  double beta_phase = 0.0;
  double irac = 0.0;
  double mae_bpm = 0.0;
  double std_bpm = 0.0;
  double dtw_mean = 0.0;
  LossComponents losses;
  double total = 0.0;
};

/// Metrics on the test split at one (beta_amp, beta_phase).
PointEvaluation evaluate_point(const Cohort& cohort, const PipelineConfig& config,
                               double beta_amp, double beta_phase);

/// sigma = sqrt(mean((e - mu)^2)) with signed errors e and mu = MAE (as
/// written); as_written = false uses the std of the absolute errors.
double rate_error_std(std::span<const double> pred, std::span<const double> truth,
                      bool as_written = true);

struct BetaGrid {
  Series beta_amp;
  Series beta_phase;
};

/// "lo:hi:n" -> {0} + n log-spaced values 10^lo .. 10^hi.
Series parse_log_grid(std::string_view spec);

struct TradeoffResult {
  double beta_amp = 0.0;
  double beta_phase = 0.0;
  double irac_enc = 0.0;
  double mae_bpm = 0.0;
  double std_bpm = 0.0;
  double dtw_mean = 0.0;
  double irac_clean = 0.0;
  double mae_clean = 0.0;
  std::size_t chosen = 0;
  bool feasible = false;
  std::vector<PointEvaluation> points;
  std::vector<std::size_t> pareto_front;  // indices into points, (IRAC, MAE) non-dominated
};

/// Evaluates every grid point and picks, among (IRAC, MAE) Pareto points with
/// MAE and STD inside budget and mean DTW >= delta_A, the one with the lowest
/// total loss. With no feasible point the lowest-MAE Pareto point is taken.
TradeoffResult optimize_betas(const Cohort& cohort, const BetaGrid& grid,
                              const PipelineConfig& config);

struct PtnTrainingSample {
  Series y;
  double truth_bpm = 0.0;
};

struct PtnTrainingOptions {
  std::size_t epochs = 8;
  double learning_rate = 0.05;
  double fd_step = 1e-3;
  std::size_t max_halvings = 6;
  LossWeights weights;
};

struct PtnTrainingResult {
  PtnParams params;
  Series loss_history;  // training objective before each epoch, then final
};

/// lambda_r L_r + lambda_s W(p_b, q_b) minimised with backtracking steps:
/// theta_b by central differences, TMB by analytic gradients. Throws Diverged
/// if the objective exceeds 10x its initial value.
PtnTrainingResult train_ptn(const std::vector<PtnTrainingSample>& data, double sample_rate,
                            const PtnParams& init, const PtnTrainingOptions& options = {});

/// lambda_r MAE + lambda_s mean W(p_b, q_b) for fixed parameters.
double ptn_objective(const std::vector<PtnTrainingSample>& data, double sample_rate,
                     const PtnParams& params, const LossWeights& weights);

/// theta_b from the clean train split; TMB at identity with calibrated stats.
PtnParams calibrate_ptn(const Cohort& cohort, std::uint64_t seed = 7);

}  // namespace trurm
