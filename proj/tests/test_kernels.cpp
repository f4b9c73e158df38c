#include <cmath>
#include <functional>
#include <limits>

#include "doctest.h"
#include "test_util.hpp"
#include "trurm/dtw.hpp"
#include "trurm/fft.hpp"

using namespace trurm;

namespace {

// Minimum over every monotone warping path, by explicit recursion.
double brute_dtw(const Series& a, const Series& b) {
  std::function<double(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) {
    const double c = (a[i] - b[j]) * (a[i] - b[j]);
    if (i == 0 && j == 0) return c;
    double best = std::numeric_limits<double>::infinity();
    if (i > 0) best = std::min(best, go(i - 1, j));
    if (j > 0) best = std::min(best, go(i, j - 1));
    if (i > 0 && j > 0) best = std::min(best, go(i - 1, j - 1));
    return c + best;
  };
  return go(a.size() - 1, b.size() - 1);
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("fft matches the naive DFT") {
    for (std::size_t n : {1u, 7u, 16u, 45u}) {
      const Series x = testutil::gaussian_noise(n, 1.0, n);
      const ComplexSeries X = rfft(x);
      const auto ref = testutil::naive_dft(x);
      for (std::size_t k = 0; k < n; ++k) CHECK(std::abs(X[k] - ref[k]) < 1e-9);
      const Series back = ifft_real(X);
      CHECK(testutil::rel_err(back, x) < 1e-12);
    }
  }

  TEST_CASE("zero padded rfft and helpers") {
    const Series x{1.0, 2.0, 3.0};
    const ComplexSeries X = rfft(x, 8);
    CHECK(X.size() == 8);
    CHECK(X[0] == Complex{6.0, 0.0});
    CHECK(next_pow2(5) == 8);
    CHECK(next_pow2(8) == 8);
    CHECK(bin_frequency(3, 400, 20.0) == doctest::Approx(0.15));
    const Series w = hann_window(4);
    CHECK(w[0] == doctest::Approx(0.0));
    CHECK(w[2] == doctest::Approx(1.0));
  }

  TEST_CASE("parseval") {
    const Series x = testutil::gaussian_noise(257, 1.0, 3);
    const ComplexSeries X = rfft(x);
    double s = 0.0;
    for (const auto& v : X) s += std::norm(v);
    CHECK(s / 257.0 == doctest::Approx(testutil::energy(x)).epsilon(1e-9));
  }

  TEST_CASE("dtw examples") {
    const Series a{0.3, 1.0, -2.0};
    CHECK(dtw_distance(a, a) == 0.0);
    CHECK(dtw_distance(Series{0, 0}, Series{1, 1}) == 2.0);
    CHECK(dtw_distance(Series{0, 1, 2}, Series{0, 0, 1, 2}) == 0.0);
    CHECK_THROWS_AS(dtw_distance(Series{}, a), Error);
  }

  TEST_CASE("dtw equals path enumeration on small alphabets") {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> sym(0, 2);
    std::uniform_int_distribution<std::size_t> len(1, 6);
    for (int t = 0; t < 300; ++t) {
      Series a(len(rng));
      Series b(len(rng));
      for (auto& v : a) v = sym(rng);
      for (auto& v : b) v = sym(rng);
      CHECK(dtw_distance(a, b) == brute_dtw(a, b));
      CHECK(dtw_distance(a, b) == dtw_distance(b, a));
    }
  }
}
