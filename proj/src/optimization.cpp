#include "trurm/optimization.hpp"

#include <algorithm>
#include <cmath>

#include "trurm/dtw.hpp"
#include "trurm/hilbert.hpp"

namespace trurm {

void LossWeights::validate() const {
  for (double v : {lambda_id, lambda_r, lambda_s, lambda_mor, lambda_w})
    require(std::isfinite(v) && v >= 0, "LossWeights: weights must be finite and >= 0");
}

double loss_id(const std::vector<Series>& probs, const std::vector<std::size_t>& labels) {
  require(!probs.empty() && probs.size() == labels.size(), "loss_id: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    require(labels[i] < probs[i].size(), "loss_id: label out of range");
    acc -= std::log(std::max(probs[i][labels[i]], 1e-12));
  }
  return acc / static_cast<double>(probs.size());
}

double loss_r(std::span<const double> pred_bpm, std::span<const double> true_bpm) {
  require(!pred_bpm.empty(), "loss_r: empty input");
  require(pred_bpm.size() == true_bpm.size(), "loss_r: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred_bpm.size(); ++i) acc += std::abs(pred_bpm[i] - true_bpm[i]);
  return acc / static_cast<double>(pred_bpm.size());
}

double loss_sda(const BandDistributions& bd, double nu_scale) { return sda_loss(bd, nu_scale); }

namespace {

Series central_gradient(std::span<const double> x) {
  const std::size_t n = x.size();
  Series g(n, 0.0);
  if (n < 2) return g;
  g[0] = x[1] - x[0];
  g[n - 1] = x[n - 1] - x[n - 2];
  for (std::size_t i = 1; i + 1 < n; ++i) g[i] = 0.5 * (x[i + 1] - x[i - 1]);
  return g;
}

}  // namespace

double loss_mor(std::span<const double> original, std::span<const double> encrypted,
                double lambda_w) {
  require(original.size() == encrypted.size(), "loss_mor: length mismatch");
  require(lambda_w >= 0, "loss_mor: lambda_w must be >= 0");
  const double d = dtw_distance(envelope(original), envelope(encrypted));
  if (lambda_w == 0.0) return d;
  const Series ga = central_gradient(original);
  const Series gb = central_gradient(encrypted);
  double acc = 0.0;
  for (std::size_t i = 0; i < ga.size(); ++i) acc += std::abs(ga[i] - gb[i]);
  return d + lambda_w * acc / static_cast<double>(ga.size());
}

double total_loss(const LossComponents& c, const LossWeights& w) {
  for (double v : {c.id, c.r, c.sda, c.mor})
    if (!std::isfinite(v)) fail(ErrorCode::Numeric, "total_loss: non-finite component");
  return w.lambda_r * c.r + w.lambda_s * c.sda + w.lambda_mor * c.mor - w.lambda_id * c.id;
}

double rate_error_std(std::span<const double> pred, std::span<const double> truth,
                      bool as_written) {
  const double mu = loss_r(pred, truth);
  double acc = 0.0;
  if (as_written) {
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double e = pred[i] - truth[i] - mu;
      acc += e * e;
    }
  } else {
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double e = std::abs(pred[i] - truth[i]) - mu;
      acc += e * e;
    }
  }
  return std::sqrt(acc / static_cast<double>(pred.size()));
}

namespace {

double fallback_rate(const PtnParams& p) { return 30.0 * (p.band.low_hz + p.band.high_hz); }

}  // namespace

PipelineRun run_pipeline(const Cohort& cohort, const PipelineConfig& config, bool encrypted) {
  const std::size_t n = cohort.samples.size();
  require(n > 0, "run_pipeline: empty cohort");
  PipelineRun run;
  run.encrypted = encrypted;
  run.pred_bpm.assign(n, 0.0);
  run.true_bpm.assign(n, 0.0);
  run.prominence.assign(n, 0.0);
  run.dtw.assign(n, 0.0);
  run.signals.assign(n, {});
  if (encrypted) run.in_band.assign(n, {});
  std::vector<IdFeatureVector> features(n);

  parallel_for(n, [&](std::size_t i) {
    const CohortSample& s = cohort.samples[i];
    const double fs = s.decomposition.sample_rate;
    if (encrypted) {
      EncryptedSegment enc = encrypt_segment(s.decomposition, config.key, config.perturbation);
      run.dtw[i] = enc.dtw_score;
      Series in_band(enc.size());
      for (std::size_t t = 0; t < in_band.size(); ++t)
        in_band[t] = enc.x_ure[t] + enc.x_enc_analytic[t].real();
      run.in_band[i] = std::move(in_band);
      run.signals[i] = std::move(enc.y);
    } else {
      run.signals[i] = s.decomposition.recombined();
    }
    run.true_bpm[i] = s.segment.truth_bpm.value_or(std::nan(""));
    try {
      const MonitorResult m = ptn_monitor(run.signals[i], fs, config.ptn);
      run.pred_bpm[i] = m.rate.rate_bpm;
      run.prominence[i] = m.rate.prominence;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoRespiration) throw;
      run.pred_bpm[i] = fallback_rate(config.ptn);
    }
    features[i] = extract_id_features(run.signals[i], fs);
  });

  std::vector<LabeledFeatures> train;
  std::vector<LabeledFeatures> test;
  for (std::size_t i = 0; i < n; ++i) {
    LabeledFeatures lf{features[i], cohort.samples[i].segment.label};
    (cohort.samples[i].test ? test : train).push_back(lf);
  }
  const IdClassifier clf = train_classifier(train, config.adversary);
  run.attack = evaluate_classifier(clf, test);
  std::vector<Series> probs;
  std::vector<std::size_t> labels;
  for (const auto& t : test) {
    run.test_labels.push_back(t.label);
    const auto it = std::find(clf.class_labels.begin(), clf.class_labels.end(), t.label);
    if (it == clf.class_labels.end()) continue;
    probs.push_back(clf.predict_proba(t.features));
    labels.push_back(static_cast<std::size_t>(it - clf.class_labels.begin()));
  }
  run.loss_id = probs.empty() ? 0.0 : loss_id(probs, labels);
  return run;
}

PointEvaluation evaluate_point(const Cohort& cohort, const PipelineConfig& config,
                               double beta_amp, double beta_phase) {
  PipelineConfig cfg = config;
  cfg.perturbation.beta_amp = beta_amp;
  cfg.perturbation.beta_phase = beta_phase;
  const PipelineRun run = run_pipeline(cohort, cfg, true);
  const auto test = cohort.test_indices();

  PointEvaluation pt;
  pt.beta_amp = beta_amp;
  pt.beta_phase = beta_phase;
  pt.irac = run.attack.irac;
  Series pred;
  Series truth;
  Series mor(test.size(), 0.0);
  double dtw_acc = 0.0;
  for (auto i : test) {
    pred.push_back(run.pred_bpm[i]);
    truth.push_back(run.true_bpm[i]);
    dtw_acc += run.dtw[i];
  }
  parallel_for(test.size(), [&](std::size_t j) {
    const std::size_t i = test[j];
    // Morphology of the respiratory component: x_re against its encrypted form.
    mor[j] = loss_mor(cohort.samples[i].decomposition.x_re(), run.in_band[i],
                      cfg.weights.lambda_w);
  });
  pt.mae_bpm = loss_r(pred, truth);
  pt.std_bpm = rate_error_std(pred, truth);
  pt.dtw_mean = dtw_acc / static_cast<double>(test.size());

  const std::size_t n_sda = std::min(cfg.sda_samples, test.size());
  Series sda(n_sda, 0.0);
  parallel_for(n_sda, [&](std::size_t j) {
    const std::size_t i = test[j * test.size() / n_sda];
    const Series c = remove_mean(run.signals[i]);
    const Spectrogram spec =
        stft(c, cohort.samples[i].decomposition.sample_rate, cfg.ptn.stft.fitted(c.size()));
    sda[j] = loss_sda(band_distributions(spec, cfg.ptn.band, cfg.ptn.theta_b), cfg.ptn.nu_scale);
  });

  pt.losses.id = run.loss_id;
  pt.losses.r = pt.mae_bpm;
  pt.losses.sda = n_sda > 0 ? mean(sda) : 0.0;
  pt.losses.mor = mean(mor);
  pt.total = total_loss(pt.losses, cfg.weights);
  return pt;
}

Series parse_log_grid(std::string_view spec) {
  std::vector<double> parts;
  std::size_t start = 0;
  while (start <= spec.size()) {
    const std::size_t end = std::min(spec.find(':', start), spec.size());
    const std::string token(spec.substr(start, end - start));
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(token, &used);
      if (used != token.size()) throw std::invalid_argument(token);
    } catch (const std::exception&) {
      fail(ErrorCode::InvalidArgument, "grid: expected lo:hi:n, got '" + std::string(spec) + "'");
    }
    parts.push_back(v);
    start = end + 1;
  }
  require(parts.size() == 3, "grid: expected lo:hi:n");
  const double count = parts[2];
  require(count >= 1 && count == std::floor(count) && count <= 64, "grid: n must be in [1, 64]");
  const auto n = static_cast<std::size_t>(count);
  Series out{0.0};
  for (std::size_t i = 0; i < n; ++i) {
    const double e = n == 1 ? parts[0]
                            : parts[0] + (parts[1] - parts[0]) * static_cast<double>(i) /
                                             static_cast<double>(n - 1);
    out.push_back(std::pow(10.0, e));
  }
  return out;
}

TradeoffResult optimize_betas(const Cohort& cohort, const BetaGrid& grid,
                              const PipelineConfig& config) {
  require(!grid.beta_amp.empty() && !grid.beta_phase.empty(), "optimize_betas: empty grid");
  config.weights.validate();
  TradeoffResult result;
  {
    const PipelineRun clean = run_pipeline(cohort, config, false);
    Series pred;
    Series truth;
    for (auto i : cohort.test_indices()) {
      pred.push_back(clean.pred_bpm[i]);
      truth.push_back(clean.true_bpm[i]);
    }
    result.irac_clean = clean.attack.irac;
    result.mae_clean = loss_r(pred, truth);
  }
  for (double a : grid.beta_amp)
    for (double p : grid.beta_phase) result.points.push_back(evaluate_point(cohort, config, a, p));

  const auto& pts = result.points;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < pts.size() && !dominated; ++j)
      dominated = j != i && pts[j].irac <= pts[i].irac && pts[j].mae_bpm <= pts[i].mae_bpm &&
                  (pts[j].irac < pts[i].irac || pts[j].mae_bpm < pts[i].mae_bpm);
    if (!dominated) result.pareto_front.push_back(i);
  }
  std::size_t best = result.pareto_front.front();
  bool found = false;
  for (auto i : result.pareto_front) {
    if (pts[i].mae_bpm > config.mae_budget_bpm || pts[i].std_bpm > config.std_budget_bpm ||
        pts[i].dtw_mean < config.perturbation.delta_A)
      continue;
    if (!found || pts[i].total < pts[best].total) {
      best = i;
      found = true;
    }
  }
  if (!found)
    for (auto i : result.pareto_front)
      if (pts[i].mae_bpm < pts[best].mae_bpm) best = i;

  result.chosen = best;
  result.feasible = found;
  result.beta_amp = pts[best].beta_amp;
  result.beta_phase = pts[best].beta_phase;
  result.irac_enc = pts[best].irac;
  result.mae_bpm = pts[best].mae_bpm;
  result.std_bpm = pts[best].std_bpm;
  result.dtw_mean = pts[best].dtw_mean;
  return result;
}

// ---------------------------------------------------------------- PTN training

namespace {

struct CachedSample {
  Series centered;
  Spectrogram spec;
  BandDistributions bd;  // p parts fixed; q_b replaced per evaluation
  double truth = 0.0;
};

std::vector<CachedSample> cache_samples(const std::vector<PtnTrainingSample>& data,
                                        double sample_rate, const PtnParams& params) {
  std::vector<CachedSample> out(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    CachedSample& c = out[i];
    c.centered = remove_mean(data[i].y);
    c.truth = data[i].truth_bpm;
    if (params.sdab_enabled) {
      c.spec = stft(c.centered, sample_rate, params.stft.fitted(c.centered.size()));
      c.bd = band_distributions(c.spec, params.band);
    }
  });
  return out;
}

struct SampleEval {
  Series reconstructed;
  Series refined;
  double rate = 0.0;
  double w_b = 0.0;
};

SampleEval eval_sample(const CachedSample& c, double sample_rate, const PtnParams& params,
                       const Series& q_b, bool want_w) {
  SampleEval e;
  if (params.sdab_enabled) {
    BandDistributions bd = c.bd;
    bd.q_b = q_b;
    e.reconstructed = apply_mask_reconstruct(c.spec, reallocation_mask(bd));
    if (want_w) {
      SinkhornOptions opt;
      opt.nu_scale = params.nu_scale;
      e.w_b = sinkhorn(bd.p_b, bd.q_b, bd.freqs_b, bd.freqs_b, opt).objective;
    }
  } else {
    e.reconstructed = c.centered;
  }
  e.refined = tmb_forward(e.reconstructed, params.tmb);
  try {
    e.rate = estimate_resp_rate(e.refined, sample_rate, params.band).rate_bpm;
  } catch (const Error& err) {
    if (err.code() != ErrorCode::NoRespiration) throw;
    e.rate = fallback_rate(params);
  }
  return e;
}

Series current_q(const CachedSample& any, const PtnParams& params) {
  if (!params.sdab_enabled) return {};
  if (params.theta_b.empty())
    return Series(any.bd.F_b.size(), 1.0 / static_cast<double>(any.bd.F_b.size()));
  return softmax(params.theta_b);
}

double objective(const std::vector<CachedSample>& cache, double sample_rate,
                 const PtnParams& params, const LossWeights& w) {
  const Series q = current_q(cache.front(), params);
  Series err(cache.size());
  Series wb(cache.size());
  const bool want_w = params.sdab_enabled && w.lambda_s > 0;
  parallel_for(cache.size(), [&](std::size_t i) {
    const SampleEval e = eval_sample(cache[i], sample_rate, params, q, want_w);
    err[i] = std::abs(e.rate - cache[i].truth);
    wb[i] = e.w_b;
  });
  return w.lambda_r * mean(err) + w.lambda_s * mean(wb);
}

double block_norm(std::span<const double> g) { return l2_norm(g); }

}  // namespace

double ptn_objective(const std::vector<PtnTrainingSample>& data, double sample_rate,
                     const PtnParams& params, const LossWeights& weights) {
  require(!data.empty(), "ptn_objective: no samples");
  return objective(cache_samples(data, sample_rate, params), sample_rate, params, weights);
}

PtnTrainingResult train_ptn(const std::vector<PtnTrainingSample>& data, double sample_rate,
                            const PtnParams& init, const PtnTrainingOptions& options) {
  require(!data.empty(), "train_ptn: no samples");
  require(options.learning_rate >= 0 && options.fd_step > 0, "train_ptn: invalid options");
  options.weights.validate();
  PtnTrainingResult result;
  result.params = init;
  PtnParams& p = result.params;
  const auto cache = cache_samples(data, sample_rate, p);
  if (p.sdab_enabled && p.theta_b.empty()) p.theta_b.assign(cache.front().bd.F_b.size(), 0.0);

  double j_cur = objective(cache, sample_rate, p, options.weights);
  const double j0 = j_cur;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    result.loss_history.push_back(j_cur);

    // theta_b: central differences on the full objective.
    Series g_theta(p.theta_b.size(), 0.0);
    for (std::size_t d = 0; d < p.theta_b.size(); ++d) {
      PtnParams plus = p;
      PtnParams minus = p;
      plus.theta_b[d] += options.fd_step;
      minus.theta_b[d] -= options.fd_step;
      g_theta[d] = (objective(cache, sample_rate, plus, options.weights) -
                    objective(cache, sample_rate, minus, options.weights)) /
                   (2.0 * options.fd_step);
    }

    // TMB: analytic, through the rate estimator.
    Series g_tmb(p.tmb.parameter_count(), 0.0);
    if (!p.tmb.layers.empty()) {
      const Series q = current_q(cache.front(), p);
      std::vector<Series> per(cache.size());
      parallel_for(cache.size(), [&](std::size_t i) {
        const SampleEval e = eval_sample(cache[i], sample_rate, p, q, false);
        const double diff = e.rate - cache[i].truth;
        if (diff == 0.0) {
          per[i].assign(g_tmb.size(), 0.0);
          return;
        }
        Series go = resp_rate_gradient(e.refined, sample_rate, p.band);
        for (double& v : go) v *= (diff > 0 ? 1.0 : -1.0);
        per[i] = tmb_backward(e.reconstructed, p.tmb, go);
      });
      const double scale = options.weights.lambda_r / static_cast<double>(cache.size());
      for (const auto& g : per)
        for (std::size_t k = 0; k < g.size(); ++k) g_tmb[k] += scale * g[k];
    }

    const double nt = block_norm(g_theta);
    const double nm = block_norm(g_tmb);
    double lr = options.learning_rate;
    for (std::size_t h = 0; h <= options.max_halvings && lr > 0; ++h, lr *= 0.5) {
      PtnParams trial = p;
      if (nt > 0)
        for (std::size_t d = 0; d < g_theta.size(); ++d) trial.theta_b[d] -= lr * g_theta[d] / nt;
      if (nm > 0) {
        Series flat = trial.tmb.flatten();
        for (std::size_t k = 0; k < flat.size(); ++k) flat[k] -= lr * g_tmb[k] / nm;
        trial.tmb.unflatten(flat);
      }
      const double j_new = objective(cache, sample_rate, trial, options.weights);
      if (!std::isfinite(j_new) || j_new > 10.0 * j0 + 1e-12)
        fail(ErrorCode::Diverged, "train_ptn: objective diverged");
      if (j_new < j_cur) {
        p = std::move(trial);
        j_cur = j_new;
        break;
      }
    }
  }
  result.loss_history.push_back(j_cur);
  return result;
}

PtnParams calibrate_ptn(const Cohort& cohort, std::uint64_t seed) {
  const auto train = cohort.train_indices();
  require(!train.empty(), "calibrate_ptn: empty train split");
  std::vector<Series> clean;
  for (auto i : train) clean.push_back(cohort.samples[i].decomposition.recombined());
  const double fs = cohort.samples[train.front()].decomposition.sample_rate;
  PtnParams p = PtnParams::initial(seed);
  p.theta_b = theta_from_clean(clean, fs, p.stft, p.band);
  std::vector<Series> recon(clean.size());
  PtnParams sdab_only = p;
  sdab_only.tmb.layers.clear();
  parallel_for(clean.size(), [&](std::size_t i) {
    recon[i] = ptn_monitor(clean[i], fs, sdab_only).reconstructed;
  });
  tmb_calibrate_stats(p.tmb, recon);
  return p;
}

}  // namespace trurm
