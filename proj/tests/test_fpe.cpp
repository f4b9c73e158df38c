#include <cmath>

#include "doctest.h"
#include "test_util.hpp"
#include "trurm/fft.hpp"
#include "trurm/fpe.hpp"
#include "trurm/hilbert.hpp"

using namespace trurm;

namespace {

EncryptionKey key_from_bits(std::initializer_list<int> bits) {
  std::vector<std::uint8_t> v;
  for (int b : bits) v.push_back(static_cast<std::uint8_t>(b));
  return EncryptionKey(v);
}

DecomposedSignal synthetic_decomposition(std::uint64_t seed) {
  const std::size_t n = 400;
  const Series x = testutil::add(
      testutil::add(testutil::tone(0.25, 20.0, n, 2.0), testutil::tone(0.45, 20.0, n, 0.6, 0.3 * seed)),
      testutil::add(testutil::tone(1.3, 20.0, n, 0.2), testutil::gaussian_noise(n, 0.05, seed)));
  return decompose(x, 20.0);
}

double ncc(const Series& a, const Series& b) {
  double ab = 0.0;
  double aa = 0.0;
  double bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

}  // namespace

TEST_SUITE("fpe") {
  TEST_CASE("seed is the binary-weighted key") {
    CHECK(derive_seed(key_from_bits({0, 0, 0, 0, 0, 0, 0, 0})) == 0);
    CHECK(derive_seed(key_from_bits({1, 0, 0, 0, 0, 0, 0, 1})) == 129);
    CHECK(derive_seed(key_from_bits({1, 1, 1, 1, 1, 1, 1, 1})) == 255);
    const EncryptionKey big = EncryptionKey::from_seed(256, 3);
    BigUint expected = 0;
    for (std::size_t i = 0; i < big.size(); ++i)
      if (big.bit(i)) expected += BigUint(1) << i;
    CHECK(derive_seed(big) == expected);
  }

  TEST_CASE("key hex round trip, fingerprint and bounds") {
    const EncryptionKey k = EncryptionKey::from_hex("a3f1");
    CHECK(k.size() == 16);
    CHECK(k.to_hex() == "a3f1");
    CHECK(EncryptionKey::from_hex(k.to_hex()) == k);
    // digit 'a' = 1010b: bits 0..3 are 0,1,0,1.
    CHECK(!k.bit(0));
    CHECK(k.bit(1));
    CHECK(k.fingerprint().size() == 8);
    CHECK(k.flipped(3).bit(3) != k.bit(3));
    CHECK_THROWS_AS(EncryptionKey::from_hex("zz"), Error);
    CHECK_THROWS_AS(EncryptionKey::from_hex("a"), Error);
    CHECK_THROWS_AS(EncryptionKey::from_seed(4, 1), Error);
  }

  TEST_CASE("keyed noise scale and decorrelation") {
    const Series z = gen_amp_noise(BigUint(12345), 64, 0.0);
    for (double v : z) CHECK(v == 0.0);
    const Series a = gen_amp_noise(BigUint(7), 64, 2.0);
    for (double v : a) CHECK(std::abs(v) <= 2.0);
    CHECK(gen_amp_noise(BigUint(7), 64, 2.0) == a);

    std::size_t below = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
      const EncryptionKey k = EncryptionKey::from_seed(16, s);
      const Series na = gen_amp_noise(derive_seed(k), 256, 1.0);
      const Series nb = gen_amp_noise(derive_seed(k.flipped(s % 16)), 256, 1.0);
      if (std::abs(ncc(na, nb)) < 0.3) ++below;
    }
    CHECK(below >= 95);
  }

  TEST_CASE("huge seeds stay finite and distinct") {
    const EncryptionKey k = EncryptionKey::from_seed(1024, 9);
    const Series a = gen_amp_noise(derive_seed(k), 128, 1.0);
    const Series b = gen_amp_noise(derive_seed(k.flipped(1023)), 128, 1.0);
    CHECK(all_finite(a));
    CHECK(std::abs(ncc(a, b)) < 0.5);
  }

  TEST_CASE("adaptive intensity") {
    const ComplexSeries zero(10);
    CHECK(adaptive_intensity(zero, 5.0) == 0.0);
    const ComplexSeries two(10, Complex{0.0, 2.0});
    CHECK(adaptive_intensity(two, 1.0) == doctest::Approx(2.0));
    CHECK(adaptive_intensity(two, 3.0) == doctest::Approx(6.0));
  }

  TEST_CASE("amplitude perturbation leaves the band untouched") {
    const Series x = testutil::add(testutil::tone(1.3, 20.0, 400), testutil::tone(0.3, 20.0, 400, 0.1));
    const EncryptionKey k = EncryptionKey::from_seed(16, 1);
    const AmpPerturbation z = apply_amp_perturbation(x, k, 0.0, kRespirationBand, 20.0);
    CHECK(testutil::rel_err(z.output, x) < 1e-12);
    const AmpPerturbation p = apply_amp_perturbation(x, k, 2.0, kRespirationBand, 20.0);
    CHECK(p.alpha_f > 0.0);
    const double in0 = testutil::band_energy(x, 20.0, 0.1, 0.5);
    const double in1 = testutil::band_energy(p.output, 20.0, 0.1, 0.5);
    CHECK(std::abs(in1 - in0) <= 1e-9 * in0);
    CHECK(testutil::energy(p.output) > 1.5 * testutil::energy(x));
    const Series back = remove_amp_perturbation(p.output, k, p.alpha_f, kRespirationBand, 20.0);
    CHECK(testutil::rel_err(back, x) < 1e-10);
  }

  TEST_CASE("analytic signal of a cosine") {
    const std::size_t n = 400;
    const Series x = testutil::tone(0.25, 20.0, n, 1.0, M_PI / 2);
    const ComplexSeries a = hilbert_analytic(x);
    double dev = 0.0;
    for (std::size_t i = 40; i < n - 40; ++i) {
      dev = std::max(dev, std::abs(std::abs(a[i]) - 1.0));
      CHECK(a[i].imag() == doctest::Approx(std::sin(2 * M_PI * 0.25 * i / 20.0)).epsilon(0.02));
    }
    CHECK(dev < 0.02);
    for (const auto& v : hilbert_analytic(Series(16, 0.0))) CHECK(v == Complex{});
  }

  TEST_CASE("phase window and perturbation function") {
    CHECK(phase_window(1.0, 4.0) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
    CHECK(phase_window(1.0, 4.0) == doctest::Approx(0.60653).epsilon(1e-5));
    const EncryptionKey zero(std::vector<std::uint8_t>(16, 0));
    for (double t = 0.0; t < 20.0; t += 0.37) CHECK(phase_perturbation_fn(zero, t, 20.0, 4.0) == 0.0);
    std::vector<std::uint8_t> bits(16, 0);
    bits[0] = 1;
    CHECK(phase_perturbation_fn(EncryptionKey(bits), 0.0, 20.0, 4.0) == doctest::Approx(M_PI));
  }

  TEST_CASE("phase rotation keeps the envelope") {
    const DecomposedSignal d = synthetic_decomposition(2);
    const EncryptionKey k = EncryptionKey::from_seed(16, 5);
    const PhasePerturbation z = apply_phase_perturbation(d.x_pd, k, 0.0, 4.0, 20.0);
    CHECK(testutil::rel_err(z.output, d.x_pd) < 1e-10);
    const PhasePerturbation p = apply_phase_perturbation(d.x_pd, k, 2.0, 4.0, 20.0);
    const ComplexSeries a = hilbert_analytic(d.x_pd);
    for (std::size_t i = 0; i < a.size(); ++i)
      CHECK(std::abs(std::abs(p.x_enc_analytic[i]) - std::abs(a[i])) <= 1e-12 * (1.0 + std::abs(a[i])));
    CHECK(testutil::rel_err(p.output, d.x_pd) > 0.01);
  }

  TEST_CASE("instantaneous frequency deviation") {
    const std::size_t n = 200;
    const ComplexSeries a = hilbert_analytic(testutil::tone(0.3, 20.0, n));
    const Series zero = inst_freq_deviation(a, a, 20.0);
    for (double v : zero) CHECK(v == 0.0);
    const double gamma = 0.4;  // rad/s
    ComplexSeries b(n);
    for (std::size_t i = 0; i < n; ++i) b[i] = a[i] * std::polar(1.0, gamma * i / 20.0);
    const Series dev = inst_freq_deviation(b, a, 20.0);
    for (std::size_t i = 1; i + 1 < n; ++i) CHECK(std::abs(dev[i] - gamma / (2 * M_PI)) < 1e-6);
    CHECK(deviation_power_spectrum(dev).size() == n / 2 + 1);
  }

  TEST_CASE("T_res estimate is clamped") {
    CHECK(estimate_t_res(Series(400, 0.0), 20.0) == 10.0);
    CHECK(estimate_t_res(testutil::tone(0.25, 20.0, 800), 20.0) == doctest::Approx(4.0).epsilon(0.02));
    CHECK(estimate_t_res(testutil::tone(0.45, 20.0, 800), 20.0) == doctest::Approx(2.222).epsilon(0.02));
  }

  TEST_CASE("zero betas leave the segment unchanged and decrypt is identity") {
    const DecomposedSignal d = synthetic_decomposition(3);
    const EncryptionKey k = EncryptionKey::from_seed(16, 1);
    const EncryptedSegment e = encrypt_segment(d, k, PerturbationParams{0.0, 0.0, 4, 0.0});
    CHECK(testutil::rel_err(e.y, d.recombined()) < 1e-9);
    const DecomposedSignal r = decrypt_segment(e, k.flipped(2));
    CHECK(testutil::rel_err(r.x_pd, d.x_pd) < 1e-9);
  }

  TEST_CASE("true key round trip") {
    const DecomposedSignal d = synthetic_decomposition(4);
    const EncryptionKey k = EncryptionKey::from_seed(16, 11);
    const EncryptedSegment e = encrypt_segment(d, k, PerturbationParams{3.0, 3.0, 4, 0.0});
    CHECK(e.key_fingerprint == k.fingerprint());
    CHECK(e.dtw_score > 0.0);
    const DecomposedSignal r = decrypt_segment(e, k);
    CHECK(testutil::rel_err(r.x_pd, d.x_pd) < 1e-6);
    CHECK(testutil::rel_err(r.x_ot, d.x_ot) < 1e-6);
    CHECK(testutil::rel_err(r.x_ure, d.x_ure) < 1e-6);
    CHECK_THROWS_AS(decrypt_segment(e, EncryptionKey::from_seed(32, 1)), Error);
  }

  TEST_CASE("bit-flip separation grows with phase intensity") {
    const DecomposedSignal d = synthetic_decomposition(4);
    const EncryptionKey k = EncryptionKey::from_seed(16, 11);
    // Bit i moves the phase by gamma * pi / 2^i, so low bits separate at any
    // intensity and high bits need a large gamma.
    const EncryptedSegment lo = encrypt_segment(d, k, PerturbationParams{3.0, 3.0, 4, 0.0});
    for (std::size_t b = 0; b < 4; ++b)
      CHECK(testutil::rel_err(decrypt_segment(lo, k.flipped(b)).x_pd, d.x_pd) > 0.1);
    const EncryptedSegment hi = encrypt_segment(d, k, PerturbationParams{3.0, 300.0, 4, 0.0});
    for (std::size_t b = 0; b < 16; ++b) {
      CHECK(testutil::rel_err(decrypt_segment(lo, k.flipped(b)).x_pd, d.x_pd) > 0.0);
      CHECK(testutil::rel_err(decrypt_segment(hi, k.flipped(b)).x_pd, d.x_pd) > 0.1);
    }
  }

  TEST_CASE("irreversibility budget") {
    auto b = irreversibility_budget(128, 32);
    CHECK(b.bits == 96);
    CHECK(b.brute_force_attempts == BigUint(1) << 96);
    CHECK(b.brute_force_attempts.str() == "79228162514264337593543950336");
    b = irreversibility_budget(64, 0);
    CHECK(b.bits == 64);
    CHECK(b.brute_force_attempts == BigUint(1) << 64);
    b = irreversibility_budget(16, 4);
    CHECK(b.bits == 12);
    CHECK(b.brute_force_attempts == 4096);
    CHECK_THROWS_AS(irreversibility_budget(16, 16), Error);
  }

  TEST_CASE("perturbation params validation") {
    CHECK_THROWS_AS((PerturbationParams{-1.0, 1.0, 4, 0.0}.validate(16)), Error);
    CHECK_THROWS_AS((PerturbationParams{1.0, 1.0, 16, 0.0}.validate(16)), Error);
    CHECK_NOTHROW((PerturbationParams{1.0, 1.0, 4, 0.0}.validate(16)));
  }
}
