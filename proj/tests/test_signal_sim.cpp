#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "test_util.hpp"
#include "trurm/dtw.hpp"
#include "trurm/preprocess.hpp"
#include "trurm/signal_sim.hpp"

using namespace trurm;

namespace {

PersonaProfile plain_persona() {
  PersonaProfile p;
  p.resp_rate_hz = 0.25;
  p.resp_amplitude_m = 0.001;
  p.heart_amplitude_m = 0.0;
  p.micromotion_std_m = 0.0;
  return p;
}

RadarConfig small_radar() {
  RadarConfig c;  // full-size RF defaults
  c.chirps_per_frame = 4;
  return c;
}

}  // namespace

TEST_SUITE("signal-sim") {
  TEST_CASE("radar config derived quantities") {
    const RadarConfig c;
    CHECK(c.range_resolution() == doctest::Approx(0.0375).epsilon(1e-3));
    CHECK(c.slow_time_rate() == doctest::Approx(20.0));
    CHECK(c.wavelength() == doctest::Approx(kSpeedOfLight / 77e9));
    RadarConfig bad = c;
    bad.samples_per_chirp = 1;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = c;
    bad.bandwidth_hz = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
  }

  TEST_CASE("zero amplitudes give a zero displacement") {
    PersonaProfile p = plain_persona();
    p.resp_amplitude_m = 0.0;
    const auto m = synth_displacement(p, 20.0, 20.0, 1);
    CHECK(m.displacement_m.size() == 400);
    for (double v : m.displacement_m) CHECK(v == 0.0);
  }

  TEST_CASE("pure fundamental peaks at the breathing rate") {
    const auto m = synth_displacement(plain_persona(), 20.0, 20.0, 3);
    const double f = testutil::peak_frequency(m.displacement_m, 20.0, 0.01, 10.0);
    CHECK(std::abs(f - 0.25) <= 20.0 / 400.0 + 1e-12);
  }

  TEST_CASE("harmonic content changes the cycle template") {
    PersonaProfile a = plain_persona();
    PersonaProfile b = plain_persona();
    b.harmonics = {{2, 0.3, 0.5}, {3, 0.1, 1.0}};
    const auto ma = synth_displacement(a, 20.0, 20.0, 9);
    const auto mb = synth_displacement(b, 20.0, 20.0, 9);
    // One 4 s cycle from the same starting phase.
    const Series ca(ma.displacement_m.begin(), ma.displacement_m.begin() + 80);
    const Series cb(mb.displacement_m.begin(), mb.displacement_m.begin() + 80);
    CHECK(dtw_distance(ca, cb) > 0.0);
  }

  TEST_CASE("duration shorter than one period is rejected") {
    CHECK_THROWS_AS(synth_displacement(plain_persona(), 3.0, 20.0, 1), Error);
    PersonaProfile p = plain_persona();
    p.resp_rate_hz = std::nan("");
    CHECK_THROWS_AS(synth_displacement(p, 20.0, 20.0, 1), Error);
  }

  TEST_CASE("static target lands in range bin 13") {
    const Series d(40, 0.0);
    const RadarCube cube = synth_radar_cube(d, 0.5, small_radar(), 0.0, 1);
    const TargetBin bin = select_target_bin(range_fft(cube), 2, cube.config.range_resolution());
    CHECK(bin.bin_index == 13);
    CHECK(bin.range_m == doctest::Approx(13 * 0.0375).epsilon(1e-3));
  }

  TEST_CASE("no motion gives a constant phase") {
    const Series d(100, 0.0);
    const RadarCube cube = synth_radar_cube(d, 0.5, small_radar(), 0.0, 1);
    const Series ph = cube_to_phase(cube);
    CHECK(stddev(ph) < 1e-9);
  }

  TEST_CASE("2 mm sinusoid gives 4 pi * 4 mm / lambda peak to peak") {
    const RadarConfig cfg = small_radar();
    Series d(400);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = 0.002 * std::sin(2.0 * M_PI * 0.25 * i / 20.0);
    const RadarCube cube = synth_radar_cube(d, 0.5, cfg, 0.0, 1);
    const Series ph = cube_to_phase(cube);
    const auto [lo, hi] = std::minmax_element(ph.begin(), ph.end());
    const double expected = 4.0 * M_PI * 0.004 / cfg.wavelength();
    CHECK(expected == doctest::Approx(12.91).epsilon(2e-3));
    // The cube stores float32 samples.
    CHECK(*hi - *lo == doctest::Approx(expected).epsilon(1e-4));
  }

  TEST_CASE("range outside the unambiguous interval is rejected") {
    const Series d(10, 0.0);
    CHECK_THROWS_AS(synth_radar_cube(d, 20.0, small_radar(), 0.0, 1), Error);
    CHECK_THROWS_AS(synth_radar_cube(d, 0.5, small_radar(), -1.0, 1), Error);
  }

  TEST_CASE("capture is deterministic for a fixed seed") {
    PersonaProfile p = default_cohort(3)[1];
    const RadarConfig cfg = RadarConfig::compact();
    const RadarCube a = simulate_capture(p, cfg, 20.0, 0.1, 42);
    const RadarCube b = simulate_capture(p, cfg, 20.0, 0.1, 42);
    const RadarCube c = simulate_capture(p, cfg, 20.0, 0.1, 43);
    CHECK(a.iq == b.iq);
    CHECK(a.iq != c.iq);
    REQUIRE(a.truth.has_value());
    CHECK(a.truth->id_label == 1);
    CHECK(a.frames == 400);
  }

  TEST_CASE("noiseless capture recovers the breathing rate") {
    PersonaProfile p = plain_persona();
    p.resp_rate_hz = 0.3;
    const RadarCube cube = simulate_capture(p, RadarConfig::compact(), 40.0, 0.0, 5);
    const Series ph = cube_to_phase(cube);
    const double f = testutil::peak_frequency(remove_mean(ph), 20.0, 0.1, 0.5);
    CHECK(std::abs(f - 0.3) <= 20.0 / 800.0 + 1e-12);
  }

  TEST_CASE("doubling amplitude doubles phase excursion") {
    PersonaProfile p = plain_persona();
    const auto run = [&](double amp) {
      p.resp_amplitude_m = amp;
      const Series ph = cube_to_phase(simulate_capture(p, RadarConfig::compact(), 20.0, 0.0, 2));
      const auto [lo, hi] = std::minmax_element(ph.begin(), ph.end());
      return *hi - *lo;
    };
    const double a = run(0.0005);
    const double b = run(0.001);
    CHECK(b / a == doctest::Approx(2.0).epsilon(0.01));
  }

  TEST_CASE("default cohort personas are distinct") {
    const auto c = default_cohort(13);
    REQUIRE(c.size() == 13);
    for (std::size_t i = 0; i < c.size(); ++i) {
      CHECK(c[i].id_label == static_cast<int>(i));
      CHECK_NOTHROW(c[i].validate());
      for (std::size_t j = 0; j < i; ++j) {
        CHECK(c[i].inhale_exhale_ratio != c[j].inhale_exhale_ratio);
        CHECK(c[i].harmonics[0].ratio != c[j].harmonics[0].ratio);
      }
    }
  }
}
