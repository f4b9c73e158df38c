#include "trurm/signal_sim.hpp"

#include <cmath>
#include <random>

namespace trurm {

void RadarConfig::validate() const {
  require(start_frequency_hz > 0 && bandwidth_hz > 0 && frame_period_s > 0 &&
              chirp_cycle_time_s > 0 && adc_rate_hz > 0,
          "RadarConfig: all parameters must be positive");
  require(samples_per_chirp >= 2, "RadarConfig: samples_per_chirp must be >= 2");
  require(chirps_per_frame >= 1, "RadarConfig: chirps_per_frame must be >= 1");
}

RadarConfig RadarConfig::compact() {
  RadarConfig c;
  c.samples_per_chirp = 64;
  c.chirps_per_frame = 2;
  c.adc_rate_hz = 2e6;
  return c;
}

void PersonaProfile::validate() const {
  auto finite = [](double v) { return std::isfinite(v); };
  bool ok = finite(resp_rate_hz) && finite(resp_amplitude_m) && finite(inhale_exhale_ratio) &&
            finite(heart_rate_hz) && finite(heart_amplitude_m) && finite(micromotion_std_m) &&
            finite(base_range_m) && finite(rate_jitter) && finite(amplitude_jitter);
  for (const auto& h : harmonics) ok = ok && finite(h.ratio) && finite(h.phase_rad);
  require(ok, "PersonaProfile: non-finite field");
  require(resp_rate_hz >= 0.1 && resp_rate_hz <= 0.5, "PersonaProfile: resp_rate outside [0.1, 0.5] Hz");
  require(heart_rate_hz >= 0.8 && heart_rate_hz <= 2.0, "PersonaProfile: heart_rate outside [0.8, 2.0] Hz");
  require(resp_amplitude_m >= 0 && heart_amplitude_m >= 0 && micromotion_std_m >= 0,
          "PersonaProfile: amplitudes must be nonnegative");
  require(inhale_exhale_ratio > 0, "PersonaProfile: inhale_exhale_ratio must be positive");
  require(rate_jitter >= 0 && rate_jitter < 1 && amplitude_jitter >= 0 && amplitude_jitter < 1,
          "PersonaProfile: jitter must be in [0, 1)");
  for (const auto& h : harmonics) require(h.order >= 2, "PersonaProfile: harmonic order must be >= 2");
}

void RadarCube::validate() const {
  config.validate();
  require(iq.size() == frames * config.chirps_per_frame * config.samples_per_chirp,
          "RadarCube: dimensions do not match config");
  for (const auto& v : iq)
    require(std::isfinite(v.real()) && std::isfinite(v.imag()), "RadarCube: non-finite sample");
}

namespace {

// Maps the cycle phase onto waveform phase so that the rise (trough -> peak)
// occupies inhale/(inhale+exhale) of the period.
double warp_cycle_phase(double theta, double inhale_fraction) {
  if (theta < inhale_fraction) return 0.5 * theta / inhale_fraction;
  return 0.5 + 0.5 * (theta - inhale_fraction) / (1.0 - inhale_fraction);
}

double breathing_shape(double warped, const std::vector<HarmonicTerm>& harmonics) {
  double v = -std::cos(kTwoPi * warped);
  for (const auto& h : harmonics)
    v += h.ratio * std::cos(kTwoPi * h.order * warped + h.phase_rad);
  return v;
}

}  // namespace

ChestMotion synth_displacement(const PersonaProfile& persona, double duration_s,
                               double slow_rate_hz, std::uint64_t seed) {
  persona.validate();
  require(std::isfinite(duration_s) && std::isfinite(slow_rate_hz) && slow_rate_hz > 0,
          "synth_displacement: invalid duration or rate");
  require(duration_s >= 1.0 / persona.resp_rate_hz,
          "synth_displacement: duration shorter than one respiratory period");

  const auto n = static_cast<std::size_t>(std::llround(duration_s * slow_rate_hz));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double inhale_fraction = persona.inhale_exhale_ratio / (1.0 + persona.inhale_exhale_ratio);
  auto draw_rate = [&] {
    return persona.resp_rate_hz * (1.0 + persona.rate_jitter * (2.0 * unit(rng) - 1.0));
  };
  auto draw_amp = [&] {
    return persona.resp_amplitude_m * (1.0 + persona.amplitude_jitter * (2.0 * unit(rng) - 1.0));
  };

  double cycle_phase = unit(rng);
  const double heart_phase = kTwoPi * unit(rng);
  double rate = draw_rate();
  double amp_now = draw_amp();
  double amp_next = draw_amp();

  ChestMotion out;
  out.sample_rate = slow_rate_hz;
  out.displacement_m.resize(n);
  out.resp_rate_hz.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / slow_rate_hz;
    const double amp = amp_now + (amp_next - amp_now) * cycle_phase;
    const double resp = amp * breathing_shape(warp_cycle_phase(cycle_phase, inhale_fraction),
                                              persona.harmonics);
    const double heart = persona.heart_amplitude_m *
                         std::sin(kTwoPi * persona.heart_rate_hz * t + heart_phase);
    const double micro = persona.micromotion_std_m > 0 ? persona.micromotion_std_m * gauss(rng) : 0.0;
    out.displacement_m[i] = resp + heart + micro;
    out.resp_rate_hz[i] = rate;

    cycle_phase += rate / slow_rate_hz;
    if (cycle_phase >= 1.0) {
      cycle_phase -= 1.0;
      if (persona.rate_jitter > 0) rate = draw_rate();
      amp_now = amp_next;
      amp_next = persona.amplitude_jitter > 0 ? draw_amp() : persona.resp_amplitude_m;
    }
  }
  return out;
}

RadarCube synth_radar_cube(std::span<const double> displacement_m, double base_range_m,
                           const RadarConfig& config, double range_noise_std,
                           std::uint64_t seed) {
  config.validate();
  require(range_noise_std >= 0 && std::isfinite(range_noise_std),
          "synth_radar_cube: noise std must be finite and nonnegative");
  const double res = config.range_resolution();
  for (double d : displacement_m) {
    const double r = base_range_m + d;
    require(std::isfinite(r) && r >= 0.0 && r < config.max_range(),
            "synth_radar_cube: range outside [0, samples_per_chirp * range_resolution)");
  }

  const std::size_t ns = config.samples_per_chirp;
  const std::size_t nc = config.chirps_per_frame;
  const auto bin = static_cast<double>(std::llround(base_range_m / res));
  ComplexSeries tone(ns);
  for (std::size_t s = 0; s < ns; ++s)
    tone[s] = std::polar(1.0, kTwoPi * bin * static_cast<double>(s) / static_cast<double>(ns));

  RadarCube cube;
  cube.config = config;
  cube.frames = displacement_m.size();
  cube.iq.resize(cube.frames * nc * ns);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double k = 4.0 * kPi / config.wavelength();
  for (std::size_t f = 0; f < cube.frames; ++f) {
    const Complex rot = std::polar(1.0, k * (base_range_m + displacement_m[f]));
    for (std::size_t c = 0; c < nc; ++c) {
      std::complex<float>* row = &cube.iq[(f * nc + c) * ns];
      for (std::size_t s = 0; s < ns; ++s) {
        Complex v = tone[s] * rot;
        if (range_noise_std > 0) {
          const double re = gauss(rng);
          const double im = gauss(rng);
          v += range_noise_std * Complex{re, im};
        }
        row[s] = std::complex<float>(static_cast<float>(v.real()), static_cast<float>(v.imag()));
      }
    }
  }
  return cube;
}

RadarCube simulate_capture(const PersonaProfile& persona, const RadarConfig& config,
                           double duration_s, double range_noise_std, std::uint64_t seed) {
  const ChestMotion motion = synth_displacement(persona, duration_s, config.slow_time_rate(), seed);
  // Distinct stream for the receiver noise.
  RadarCube cube = synth_radar_cube(motion.displacement_m, persona.base_range_m, config,
                                    range_noise_std, seed ^ 0x9e3779b97f4a7c15ULL);
  cube.truth = GroundTruth{motion.displacement_m, motion.resp_rate_hz, persona.id_label};
  return cube;
}

std::vector<PersonaProfile> default_cohort(std::size_t count) {
  require(count >= 1, "default_cohort: count must be >= 1");
  // Deterministic persona table; morphology parameters are spread so that
  // each subject has a distinct cycle shape and cardiac signature.
  std::mt19937_64 rng(0x7275726dULL);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<PersonaProfile> personas;
  personas.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    PersonaProfile p;
    p.id_label = static_cast<int>(i);
    p.resp_rate_hz = 0.22 + 0.06 * u(rng);
    p.resp_amplitude_m = 0.0016 + 0.0008 * u(rng);
    const double frac = count > 1 ? static_cast<double>(i) / static_cast<double>(count - 1) : 0.5;
    p.inhale_exhale_ratio = 0.6 + 0.9 * frac;
    p.harmonics = {
        {2, 0.05 + 0.35 * u(rng), kTwoPi * u(rng)},
        {3, 0.03 + 0.20 * u(rng), kTwoPi * u(rng)},
        {4, 0.02 + 0.10 * u(rng), kTwoPi * u(rng)},
    };
    p.heart_rate_hz = 0.9 + 0.8 * frac;
    p.heart_amplitude_m = 0.00010 + 0.00008 * u(rng);
    p.micromotion_std_m = 0.000010 + 0.000010 * u(rng);
    p.base_range_m = 0.5;
    personas.push_back(p);
  }
  return personas;
}

}  // namespace trurm
