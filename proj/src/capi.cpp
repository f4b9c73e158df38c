#include "trurm/trurm.h"

#include <cstring>
#include <filesystem>
#include <new>
#include <string>

#include "json.hpp"
#include "trurm/dtw.hpp"
#include "trurm/harness.hpp"
#include "trurm/io.hpp"

struct trurm_key {
  trurm::EncryptionKey key;
};

struct trurm_ptn {
  trurm::PtnParams params;
};

namespace {

using namespace trurm;

thread_local std::string g_last_error;

trurm_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return TRURM_E_INVALID_ARGUMENT;
    case ErrorCode::Io: return TRURM_E_IO;
    case ErrorCode::Numeric: return TRURM_E_NUMERIC;
    case ErrorCode::NoTarget: return TRURM_E_NO_TARGET;
    case ErrorCode::NoRespiration: return TRURM_E_NO_RESPIRATION;
    case ErrorCode::Format: return TRURM_E_FORMAT;
    case ErrorCode::Diverged: return TRURM_E_DIVERGED;
  }
  return TRURM_E_INTERNAL;
}

template <typename F>
trurm_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return TRURM_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return TRURM_E_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return TRURM_E_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return TRURM_E_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) fail(ErrorCode::InvalidArgument, std::string(what) + " is null");
}

std::size_t default_epsilon(std::size_t key_length) {
  return key_length > 32 ? 32 : key_length / 4;
}

std::vector<LabeledFeatures> labeled_features(const std::vector<LabeledSeries>& series,
                                              const std::string& path) {
  std::vector<LabeledFeatures> out(series.size());
  for (const auto& s : series)
    if (s.label < 0) fail(ErrorCode::Format, "'" + path + "' has an unlabeled segment");
  parallel_for(series.size(), [&](std::size_t i) {
    out[i] = {extract_id_features(series[i].y, series[i].sample_rate), series[i].label};
  });
  return out;
}

void apply_scenario_json(const std::string& text, ScenarioConfig& c) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(text);
    if (j.contains("distances_m")) c.distances_m = j.at("distances_m").get<Series>();
    if (j.contains("durations_s")) c.durations_s = j.at("durations_s").get<Series>();
    if (j.contains("patterns")) {
      c.patterns.clear();
      for (const auto& p : j.at("patterns")) c.patterns.push_back(parse_pattern(p.get<std::string>()));
    }
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("default_distance_m")) c.default_distance_m = j.at("default_distance_m").get<double>();
    if (j.contains("default_duration_s")) c.default_duration_s = j.at("default_duration_s").get<double>();
    if (j.contains("default_pattern"))
      c.default_pattern = parse_pattern(j.at("default_pattern").get<std::string>());
    if (j.contains("sigma_as_written")) c.sigma_as_written = j.at("sigma_as_written").get<bool>();
    if (j.contains("cohort")) c.cohort = cohort_config_from_json(j.at("cohort").dump());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Format, std::string("scenario config: ") + e.what());
  }
}

}  // namespace

extern "C" {

const char* trurm_last_error(void) { return g_last_error.c_str(); }

const char* trurm_status_name(trurm_status status) {
  switch (status) {
    case TRURM_OK: return "ok";
    case TRURM_E_INVALID_ARGUMENT: return "invalid argument";
    case TRURM_E_IO: return "io error";
    case TRURM_E_NUMERIC: return "numeric error";
    case TRURM_E_NO_TARGET: return "no target";
    case TRURM_E_NO_RESPIRATION: return "no respiration";
    case TRURM_E_FORMAT: return "format error";
    case TRURM_E_DIVERGED: return "diverged";
    case TRURM_E_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* trurm_version(void) { return "0.1.0"; }

trurm_status trurm_key_from_hex(const char* hex, trurm_key** out) {
  return guarded([&] {
    need(hex, "hex");
    need(out, "out");
    *out = new trurm_key{EncryptionKey::from_hex(hex)};
  });
}

trurm_status trurm_key_from_file(const char* path, trurm_key** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new trurm_key{read_key_file(path)};
  });
}

trurm_status trurm_key_from_seed(size_t bits, uint64_t seed, trurm_key** out) {
  return guarded([&] {
    need(out, "out");
    *out = new trurm_key{EncryptionKey::from_seed(bits, seed)};
  });
}

size_t trurm_key_length(const trurm_key* key) { return key ? key->key.size() : 0; }

trurm_status trurm_key_fingerprint(const trurm_key* key, char* out, size_t capacity) {
  return guarded([&] {
    need(key, "key");
    need(out, "out");
    const std::string fp = key->key.fingerprint();
    require(capacity > fp.size(), "fingerprint buffer too small");
    std::memcpy(out, fp.c_str(), fp.size() + 1);
  });
}

void trurm_key_free(trurm_key* key) { delete key; }

trurm_status trurm_irreversibility_budget(size_t key_length, size_t epsilon, size_t* bits,
                                          char* attempts_decimal, size_t capacity) {
  return guarded([&] {
    need(bits, "bits");
    const IrreversibilityBudget b = irreversibility_budget(key_length, epsilon);
    *bits = b.bits;
    if (attempts_decimal) {
      const std::string s = b.brute_force_attempts.str();
      require(capacity > s.size(), "attempts buffer too small");
      std::memcpy(attempts_decimal, s.c_str(), s.size() + 1);
    }
  });
}

trurm_status trurm_dtw_distance(const double* a, size_t na, const double* b, size_t nb, double* out) {
  return guarded([&] {
    need(out, "out");
    require((a || na == 0) && (b || nb == 0), "series pointer is null");
    *out = dtw_distance(std::span<const double>(a, na), std::span<const double>(b, nb));
  });
}

trurm_status trurm_estimate_rate(const double* y, size_t n, double sample_rate, double* rate_bpm,
                                 double* prominence) {
  return guarded([&] {
    need(y, "y");
    need(rate_bpm, "rate_bpm");
    const RateEstimate r = estimate_resp_rate(std::span<const double>(y, n), sample_rate);
    *rate_bpm = r.rate_bpm;
    if (prominence) *prominence = r.prominence;
  });
}

trurm_status trurm_ptn_identity(trurm_ptn** out) {
  return guarded([&] {
    need(out, "out");
    *out = new trurm_ptn{PtnParams::identity()};
  });
}

trurm_status trurm_ptn_load(const char* path, trurm_ptn** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new trurm_ptn{ptn_params_from_json(read_file(path))};
  });
}

trurm_status trurm_ptn_save(const trurm_ptn* ptn, const char* path) {
  return guarded([&] {
    need(ptn, "ptn");
    need(path, "path");
    write_file_atomic(path, ptn_params_to_json(ptn->params));
  });
}

trurm_status trurm_ptn_monitor(const trurm_ptn* ptn, const double* y, size_t n, double sample_rate,
                               double* rate_bpm) {
  return guarded([&] {
    need(ptn, "ptn");
    need(y, "y");
    need(rate_bpm, "rate_bpm");
    *rate_bpm = ptn_monitor(std::span<const double>(y, n), sample_rate, ptn->params).rate.rate_bpm;
  });
}

void trurm_ptn_free(trurm_ptn* ptn) { delete ptn; }

void trurm_simulate_options_init(trurm_simulate_options* opt) {
  if (!opt) return;
  opt->radar_config_path = nullptr;
  opt->persona_path = nullptr;
  opt->persona_index = 0;
  opt->duration_s = 60.0;
  opt->seed = 1;
  opt->distance_m = 0.5;
}

trurm_status trurm_simulate(const trurm_simulate_options* opt, const char* out_path) {
  return guarded([&] {
    need(opt, "options");
    need(out_path, "out_path");
    const RadarConfig radar = opt->radar_config_path
                                  ? radar_config_from_json(read_file(opt->radar_config_path))
                                  : RadarConfig::compact();
    PersonaProfile persona;
    if (opt->persona_path) {
      persona = persona_from_json(read_file(opt->persona_path));
    } else {
      const auto cohort = default_cohort();
      require(opt->persona_index < cohort.size(), "persona index out of range");
      persona = cohort[opt->persona_index];
    }
    double snr = 20.0;
    if (opt->distance_m > 0) {
      persona.base_range_m = opt->distance_m;
      snr = snr_db_at(opt->distance_m);
    }
    const RadarCube cube = simulate_capture(persona, radar, opt->duration_s,
                                            noise_std_for_snr(snr, radar), opt->seed);
    write_cube(out_path, cube);
  });
}

void trurm_cohort_options_init(trurm_cohort_options* opt) {
  if (!opt) return;
  opt->config_path = nullptr;
  opt->personas = 0;
  opt->sessions = 0;
  opt->seed = 1;
  opt->seed_set = 0;
}

trurm_status trurm_simulate_cohort(const trurm_cohort_options* opt, const char* out_dir) {
  return guarded([&] {
    need(opt, "options");
    need(out_dir, "out_dir");
    CohortConfig c = opt->config_path ? cohort_config_from_json(read_file(opt->config_path))
                                      : CohortConfig{};
    if (opt->personas) c.personas = opt->personas;
    if (opt->sessions) c.sessions = opt->sessions;
    if (opt->seed_set) c.seed = opt->seed;
    const Cohort cohort = build_cohort(c);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) fail(ErrorCode::Io, std::string("cannot create '") + out_dir + "'");
    const std::string dir(out_dir);
    write_decompositions(dir + "/samples.decomp", cohort.samples, c.afd);
    write_file_atomic(dir + "/cohort.json", cohort_config_to_json(c));
  });
}

trurm_status trurm_preprocess(const char* cube_path, double window_s, double overlap,
                              size_t exclude_dc_bins, const char* out_path) {
  return guarded([&] {
    need(cube_path, "cube_path");
    need(out_path, "out_path");
    const RadarCube cube = read_cube(cube_path);
    const Series phase = cube_to_phase(cube, exclude_dc_bins);
    auto segs = segment(phase, cube.config.slow_time_rate(), window_s, overlap,
                        std::filesystem::path(cube_path).filename().string());
    if (cube.truth) attach_truth(segs, *cube.truth);
    write_segments(out_path, segs);
  });
}

trurm_status trurm_decompose(const char* segments_path, size_t K, double band_low_hz,
                             double band_high_hz, const char* out_path) {
  return guarded([&] {
    need(segments_path, "segments_path");
    need(out_path, "out_path");
    AfdConfig cfg;
    cfg.vmd.K = K;
    cfg.band = Band{band_low_hz, band_high_hz};
    cfg.vmd.validate();
    require(band_low_hz > 0 && band_high_hz > band_low_hz, "band must satisfy 0 < low < high");
    const auto segs = read_segments(segments_path);
    std::vector<CohortSample> out(segs.size());
    parallel_for(segs.size(), [&](std::size_t i) {
      out[i].segment = segs[i];
      out[i].decomposition = decompose(segs[i].phase, segs[i].sample_rate, cfg);
    });
    for (auto& s : out) s.segment.phase.clear();
    write_decompositions(out_path, out, cfg);
  });
}

trurm_status trurm_encrypt(const char* decomp_path, const trurm_key* key, double beta_amp,
                           double beta_phase, size_t epsilon, const char* out_path) {
  return guarded([&] {
    need(decomp_path, "decomp_path");
    need(key, "key");
    need(out_path, "out_path");
    AfdConfig cfg;
    const auto samples = read_decompositions(decomp_path, &cfg);
    PerturbationParams params;
    params.beta_amp = beta_amp;
    params.beta_phase = beta_phase;
    params.epsilon_margin = epsilon ? epsilon : default_epsilon(key->key.size());
    params.validate(key->key.size());
    std::vector<EncryptedRecord> records(samples.size());
    parallel_for(samples.size(), [&](std::size_t i) {
      records[i].meta = samples[i].segment;
      records[i].test = samples[i].test;
      records[i].enc = encrypt_segment(samples[i].decomposition, key->key, params, 0.0, cfg.band);
    });
    write_encrypted(out_path, records, params);
  });
}

trurm_status trurm_monitor(const char* series_path, const trurm_ptn* ptn, const char* out_csv) {
  return guarded([&] {
    need(series_path, "series_path");
    need(out_csv, "out_csv");
    const PtnParams params = ptn ? ptn->params : PtnParams::identity();
    const auto series = read_series_file(series_path);
    std::vector<RateRow> rows(series.size());
    parallel_for(series.size(), [&](std::size_t i) {
      const MonitorResult m = ptn_monitor(series[i].y, series[i].sample_rate, params);
      rows[i] = {series[i].segment_index, series[i].start_time, m.rate.rate_bpm,
                 series[i].truth_bpm, m.rate.prominence};
    });
    write_file_atomic(out_csv, rates_to_csv(rows));
  });
}

trurm_status trurm_attack(const char* train_path, const char* test_path, const char* out_json) {
  return guarded([&] {
    need(train_path, "train_path");
    need(test_path, "test_path");
    need(out_json, "out_json");
    const auto train = labeled_features(read_series_file(train_path), train_path);
    const auto test = labeled_features(read_series_file(test_path), test_path);
    const IdClassifier clf = train_classifier(train);
    write_file_atomic(out_json, attack_report_to_json(evaluate_classifier(clf, test)));
  });
}

void trurm_sweep_options_init(trurm_sweep_options* opt) {
  if (!opt) return;
  const PipelineConfig d;
  opt->grid_beta_amp = "0:2:5";
  opt->grid_beta_phase = "0:2:5";
  opt->key_path = nullptr;
  opt->epsilon = 0;
  opt->mae_budget_bpm = d.mae_budget_bpm;
  opt->std_budget_bpm = d.std_budget_bpm;
  opt->delta_a = d.perturbation.delta_A;
  opt->csv_path = nullptr;
  opt->ptn_out_path = nullptr;
}

trurm_status trurm_sweep(const char* cohort_dir, const trurm_sweep_options* opt, const char* out_json) {
  return guarded([&] {
    need(cohort_dir, "cohort_dir");
    need(opt, "options");
    need(out_json, "out_json");
    need(opt->grid_beta_amp, "grid_beta_amp");
    need(opt->grid_beta_phase, "grid_beta_phase");
    const std::string dir(cohort_dir);
    Cohort cohort;
    cohort.config = cohort_config_from_json(read_file(dir + "/cohort.json"));
    cohort.samples = read_decompositions(dir + "/samples.decomp");
    const BetaGrid grid{parse_log_grid(opt->grid_beta_amp), parse_log_grid(opt->grid_beta_phase)};

    PipelineConfig pc;
    if (opt->key_path) pc.key = read_key_file(opt->key_path);
    pc.perturbation.epsilon_margin = opt->epsilon ? opt->epsilon : default_epsilon(pc.key.size());
    pc.perturbation.delta_A = opt->delta_a;
    pc.mae_budget_bpm = opt->mae_budget_bpm;
    pc.std_budget_bpm = opt->std_budget_bpm;
    pc.perturbation.validate(pc.key.size());
    pc.ptn = calibrate_ptn(cohort);
    const TradeoffResult result = optimize_betas(cohort, grid, pc);

    const std::string js = tradeoff_to_json(result);
    const std::string csv = opt->csv_path ? tradeoff_to_csv(result) : std::string();
    const std::string ptn = opt->ptn_out_path ? ptn_params_to_json(pc.ptn) : std::string();
    write_file_atomic(out_json, js);
    if (opt->csv_path) write_file_atomic(opt->csv_path, csv);
    if (opt->ptn_out_path) write_file_atomic(opt->ptn_out_path, ptn);
  });
}

void trurm_scenario_options_init(trurm_scenario_options* opt) {
  if (!opt) return;
  const ScenarioPipeline d;
  opt->config_path = nullptr;
  opt->first_seed = 1;
  opt->seed_count = 1;
  opt->sessions = 0;
  opt->beta_amp = d.beta_amp;
  opt->beta_phase = d.beta_phase;
  opt->sigma_as_written = 1;
}

trurm_status trurm_sweep_scenarios(const trurm_scenario_options* opt, const char* out_prefix) {
  return guarded([&] {
    need(opt, "options");
    need(out_prefix, "out_prefix");
    ScenarioConfig cfg;
    cfg.seeds.clear();
    for (std::size_t i = 0; i < opt->seed_count; ++i) cfg.seeds.push_back(opt->first_seed + i);
    if (opt->config_path) apply_scenario_json(read_file(opt->config_path), cfg);
    if (opt->sessions) cfg.cohort.sessions = opt->sessions;
    cfg.sigma_as_written = opt->sigma_as_written != 0;
    ScenarioPipeline pipe;
    pipe.beta_amp = opt->beta_amp;
    pipe.beta_phase = opt->beta_phase;
    emit_reports(run_scenario_sweep(cfg, pipe), out_prefix);
  });
}

trurm_status trurm_evaluate(const char* rates_csv, const char* attack_json, int sigma_as_written,
                            const char* out_json) {
  return guarded([&] {
    need(rates_csv, "rates_csv");
    need(out_json, "out_json");
    const auto rows = rates_from_csv(read_file(rates_csv));
    Series pred;
    Series truth;
    for (const auto& r : rows) {
      if (!r.truth_bpm) fail(ErrorCode::Format, "rates CSV lacks truth_bpm");
      pred.push_back(r.rate_bpm);
      truth.push_back(*r.truth_bpm);
    }
    std::vector<int> id_pred;
    std::vector<int> id_truth;
    if (attack_json) {
      const AttackReport a = attack_report_from_json(read_file(attack_json));
      const std::size_t k = a.class_labels.size();
      if (a.confusion.size() != k) fail(ErrorCode::Format, "confusion matrix shape mismatch");
      for (std::size_t r = 0; r < k; ++r) {
        if (a.confusion[r].size() != k) fail(ErrorCode::Format, "confusion matrix shape mismatch");
        for (std::size_t c = 0; c < k; ++c)
          for (std::size_t n = 0; n < a.confusion[r][c]; ++n) {
            id_truth.push_back(a.class_labels[r]);
            id_pred.push_back(a.class_labels[c]);
          }
      }
    }
    Scenario scenario;
    const MetricsReport m = compute_metrics(pred, truth, id_pred, id_truth, scenario, sigma_as_written != 0);
    write_file_atomic(out_json, reports_to_json({m}));
  });
}

}  // extern "C"
