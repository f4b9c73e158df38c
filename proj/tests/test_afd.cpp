#include <cmath>

#include "doctest.h"
#include "test_util.hpp"
#include "trurm/afd.hpp"

using namespace trurm;

TEST_SUITE("afd") {
  TEST_CASE("butterworth bandpass has unity center gain and -3 dB edges") {
    const SosFilter f = butterworth_bandpass(4, 0.1, 0.5, 20.0);
    CHECK(f.sections.size() == 4);
    const double fc = std::sqrt(std::tan(M_PI * 0.1 / 20.0) * std::tan(M_PI * 0.5 / 20.0));
    const double center = std::atan(fc) * 20.0 / M_PI;
    CHECK(std::abs(sos_response(f, center, 20.0)) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(sos_response(f, 0.1, 20.0)) == doctest::Approx(M_SQRT1_2).epsilon(1e-6));
    CHECK(std::abs(sos_response(f, 0.5, 20.0)) == doctest::Approx(M_SQRT1_2).epsilon(1e-6));
    // Analog prototype on the prewarped axis: 1 / sqrt(1 + ((W^2 - W0^2) / (W B))^(2N)).
    const double wl = std::tan(M_PI * 0.1 / 20.0);
    const double wh = std::tan(M_PI * 0.5 / 20.0);
    for (double fq : {0.05, 0.2, 0.8, 2.0, 5.0}) {
      const double w = std::tan(M_PI * fq / 20.0);
      const double r = (w * w - wl * wh) / (w * (wh - wl));
      const double expected = 1.0 / std::sqrt(1.0 + std::pow(r, 8));
      CHECK(std::abs(sos_response(f, fq, 20.0)) == doctest::Approx(expected).epsilon(1e-6));
    }
  }

  TEST_CASE("invalid filter bands are rejected") {
    CHECK_THROWS_AS(butterworth_bandpass(4, 0.5, 0.1, 20.0), Error);
    CHECK_THROWS_AS(butterworth_bandpass(4, 0.1, 12.0, 20.0), Error);
    CHECK_THROWS_AS(butterworth_bandpass(0, 0.1, 0.5, 20.0), Error);
  }

  TEST_CASE("respiratory tone stays in band") {
    const Series x = testutil::tone(0.25, 20.0, 400);
    const BandSplit s = bandpass_butterworth(x, 20.0, kRespirationBand);
    const double e = testutil::energy(x);
    CHECK(testutil::energy(s.x_re) >= 0.99 * e);
    CHECK(testutil::energy(s.x_ot) <= 0.01 * e);
  }

  TEST_CASE("heartbeat tone goes to the other part") {
    const Series x = testutil::tone(1.2, 20.0, 400);
    const BandSplit s = bandpass_butterworth(x, 20.0, kRespirationBand);
    CHECK(testutil::energy(s.x_ot) >= 0.99 * testutil::energy(x));
  }

  TEST_CASE("band split is exact and zero in gives zero out") {
    Series x = testutil::add(testutil::tone(0.3, 20.0, 400), testutil::gaussian_noise(400, 0.3, 5));
    const BandSplit s = bandpass_butterworth(x, 20.0, kRespirationBand);
    const Series centered = remove_mean(x);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(s.x_re[i] + s.x_ot[i] == doctest::Approx(centered[i]));
    const BandSplit z = bandpass_butterworth(Series(400, 0.0), 20.0, kRespirationBand);
    for (std::size_t i = 0; i < 400; ++i) {
      CHECK(z.x_re[i] == 0.0);
      CHECK(z.x_ot[i] == 0.0);
    }
  }

  TEST_CASE("zero-phase filtering keeps an in-band tone aligned") {
    const Series x = testutil::tone(0.3, 20.0, 1200);
    const Series y = sosfiltfilt(butterworth_bandpass(4, 0.1, 0.5, 20.0), x);
    // Interior samples match the input, no delay.
    double err = 0.0;
    for (std::size_t i = 300; i < 900; ++i) err = std::max(err, std::abs(y[i] - x[i]));
    CHECK(err < 0.02);
  }

  // 60 s signals: at 20 s the bandwidth penalty is too weak to keep the modes apart.
  TEST_CASE("VMD separates two tones") {
    const std::size_t n = 1200;
    const Series x = testutil::add(testutil::tone(0.15, 20.0, n), testutil::tone(0.45, 20.0, n, 0.5));
    VmdParams p;
    p.K = 2;
    const VmdResult r = vmd_decompose(x, 20.0, p);
    REQUIRE(r.modes.size() == 2);
    CHECK(std::abs(r.modes[0].center_hz - 0.15) <= 0.015);
    CHECK(std::abs(r.modes[1].center_hz - 0.45) <= 0.045);
    CHECK(r.modes[0].center_hz < r.modes[1].center_hz);
  }

  TEST_CASE("VMD of zero input terminates with zero modes") {
    VmdParams p;
    p.K = 3;
    const VmdResult r = vmd_decompose(Series(200, 0.0), 20.0, p);
    CHECK(r.modes.size() == 3);
    for (const auto& m : r.modes)
      for (double v : m.u) CHECK(v == 0.0);
  }

  TEST_CASE("VMD single tone concentrates in one mode") {
    const Series x = testutil::tone(0.3, 20.0, 1200);
    VmdParams p;
    p.K = 2;
    const VmdResult r = vmd_decompose(x, 20.0, p);
    double best = 0.0;
    double total = 0.0;
    for (const auto& m : r.modes) {
      best = std::max(best, testutil::energy(m.u));
      total += testutil::energy(m.u);
    }
    CHECK(best >= 0.9 * total);
  }

  TEST_CASE("VMD parameter validation") {
    VmdParams p;
    p.K = 0;
    CHECK_THROWS_AS(p.validate(), Error);
    p = {};
    p.penalty_alpha = -1.0;
    CHECK_THROWS_AS(p.validate(), Error);
    CHECK_THROWS_AS(vmd_decompose(Series(3, 0.0), 20.0, VmdParams{}), Error);
  }

  TEST_CASE("component split picks the in-band mode with more energy") {
    const std::size_t n = 400;
    std::vector<VmdMode> modes{{testutil::tone(0.15, 20.0, n, 1.0), 0.15},
                               {testutil::tone(0.45, 20.0, n, 0.5), 0.45}};
    ComponentSplit s = split_components(modes, 20.0, kRespirationBand);
    CHECK(s.ure_mode == 0);
    CHECK(s.x_ure == modes[0].u);
    CHECK(s.x_pd == modes[1].u);
    std::swap(modes[0].u, modes[1].u);
    modes[0].u = testutil::tone(0.15, 20.0, n, 0.2);
    s = split_components(modes, 20.0, kRespirationBand);
    CHECK(s.ure_mode == 1);
  }

  TEST_CASE("component split of zero modes is zero") {
    std::vector<VmdMode> modes{{Series(50, 0.0), 0.1}, {Series(50, 0.0), 0.3}};
    const ComponentSplit s = split_components(modes, 20.0, kRespirationBand);
    for (std::size_t i = 0; i < 50; ++i) {
      CHECK(s.x_ure[i] == 0.0);
      CHECK(s.x_pd[i] == 0.0);
    }
  }

  TEST_CASE("decomposition reconstructs the centered segment") {
    Series x = testutil::add(testutil::tone(0.27, 20.0, 400, 2.0), testutil::tone(0.4, 20.0, 400, 0.4));
    x = testutil::add(x, testutil::tone(1.1, 20.0, 400, 0.1));
    for (auto& v : x) v += 3.0;
    const DecomposedSignal d = decompose(x, 20.0);
    const Series c = remove_mean(x);
    CHECK(relative_l2_error(d.recombined(), c) < 1e-9);
    CHECK(d.size() == 400);
    CHECK(testutil::energy(d.x_ure) > testutil::energy(d.x_pd));
  }
}
