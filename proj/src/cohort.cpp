#include "trurm/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace trurm {

std::string pattern_name(BreathingPattern p) {
  switch (p) {
    case BreathingPattern::Natural: return "natural";
    case BreathingPattern::Deep: return "deep";
    case BreathingPattern::Irregular: return "irregular";
  }
  return "natural";
}

BreathingPattern parse_pattern(std::string_view name) {
  if (name == "natural") return BreathingPattern::Natural;
  if (name == "deep") return BreathingPattern::Deep;
  if (name == "irregular") return BreathingPattern::Irregular;
  fail(ErrorCode::InvalidArgument, "unknown breathing pattern: " + std::string(name));
}

PersonaProfile apply_pattern(const PersonaProfile& persona, BreathingPattern pattern) {
  PersonaProfile p = persona;
  switch (pattern) {
    case BreathingPattern::Natural:
      break;
    case BreathingPattern::Deep:
      p.resp_amplitude_m *= 2.0;
      p.resp_rate_hz = std::max(kRespirationBand.low_hz, p.resp_rate_hz * 0.8);
      break;
    case BreathingPattern::Irregular:
      p.rate_jitter = 0.2;
      p.amplitude_jitter = 0.2;
      break;
  }
  return p;
}

double snr_db_at(double distance_m, double ref_snr_db, double ref_distance_m) {
  require(distance_m > 0 && ref_distance_m > 0, "snr_db_at: distances must be positive");
  return ref_snr_db - 40.0 * std::log10(distance_m / ref_distance_m);
}

double noise_std_for_snr(double snr_db, const RadarConfig& config) {
  const double ns = static_cast<double>(config.samples_per_chirp);
  const double nc = static_cast<double>(config.chirps_per_frame);
  return std::sqrt(ns * nc / (2.0 * std::pow(10.0, snr_db / 10.0)));
}

void CohortConfig::validate() const {
  require(personas >= 2, "CohortConfig: need at least two personas");
  require(sessions >= 2, "CohortConfig: need at least two sessions per persona");
  require(session_s >= window_s, "CohortConfig: session shorter than the window");
  require(test_fraction > 0 && test_fraction < 1, "CohortConfig: test fraction must be in (0, 1)");
  require(distance_m > 0, "CohortConfig: distance must be positive");
  require(session_rate_jitter >= 0 && session_rate_jitter < 1 && session_amp_jitter >= 0 &&
              session_amp_jitter < 1,
          "CohortConfig: session jitter must be in [0, 1)");
  radar.validate();
}

std::vector<std::size_t> Cohort::train_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (!samples[i].test) out.push_back(i);
  return out;
}

std::vector<std::size_t> Cohort::test_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (samples[i].test) out.push_back(i);
  return out;
}

namespace {

struct SessionPlan {
  PersonaProfile persona;
  std::size_t session = 0;
  bool test = false;
  std::uint64_t seed = 0;
};

}  // namespace

Cohort build_cohort(const CohortConfig& config) {
  config.validate();
  const auto personas = default_cohort(config.personas);
  const double noise = noise_std_for_snr(
      snr_db_at(config.distance_m, config.ref_snr_db, config.ref_distance_m), config.radar);

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const auto n_test = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(config.test_fraction * static_cast<double>(config.sessions))));
  std::vector<SessionPlan> plans;
  for (const auto& base : personas) {
    std::vector<std::size_t> order(config.sessions);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<bool> is_test(config.sessions, false);
    for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = true;
    for (std::size_t s = 0; s < config.sessions; ++s) {
      SessionPlan plan;
      plan.persona = apply_pattern(base, config.pattern);
      plan.persona.base_range_m = config.distance_m;
      plan.persona.resp_rate_hz = std::clamp(
          plan.persona.resp_rate_hz * (1.0 + config.session_rate_jitter * unit(rng)),
          kRespirationBand.low_hz, kRespirationBand.high_hz);
      plan.persona.resp_amplitude_m *= 1.0 + config.session_amp_jitter * unit(rng);
      plan.session = s;
      plan.test = is_test[s];
      plan.seed = rng();
      plans.push_back(plan);
    }
  }

  std::vector<std::vector<CohortSample>> per_session(plans.size());
  parallel_for(plans.size(), [&](std::size_t i) {
    const SessionPlan& plan = plans[i];
    const RadarCube cube =
        simulate_capture(plan.persona, config.radar, config.session_s, noise, plan.seed);
    const Series phase = cube_to_phase(cube);
    const double fs = config.radar.slow_time_rate();
    const std::string source =
        "p" + std::to_string(plan.persona.id_label) + "s" + std::to_string(plan.session);
    auto segments = segment(phase, fs, config.window_s, config.overlap, source);
    attach_truth(segments, *cube.truth);
    for (auto& seg : segments) {
      CohortSample sample;
      sample.decomposition = decompose(seg.phase, fs, config.afd);
      sample.segment = std::move(seg);
      sample.session = plan.session;
      sample.test = plan.test;
      per_session[i].push_back(std::move(sample));
    }
  });

  Cohort cohort;
  cohort.config = config;
  for (auto& v : per_session)
    for (auto& s : v) cohort.samples.push_back(std::move(s));
  return cohort;
}

}  // namespace trurm
