#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace trurm {

using Series = std::vector<double>;
using Complex = std::complex<double>;
using ComplexSeries = std::vector<Complex>;

enum class ErrorCode {
  InvalidArgument = 1,
  Io = 2,
  Numeric = 3,
  NoTarget = 4,
  NoRespiration = 5,
  Format = 6,
  Diverged = 7,
};

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool condition, const std::string& what) {
  if (!condition) fail(ErrorCode::InvalidArgument, what);
}

/// Closed frequency interval in Hz.
struct Band {
  double low_hz = 0.1;
  double high_hz = 0.5;

  bool contains(double f) const { return f >= low_hz && f <= high_hz; }
  double width() const { return high_hz - low_hz; }
};

inline constexpr Band kRespirationBand{0.1, 0.5};
inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

double sum(std::span<const double> x);
double mean(std::span<const double> x);
double energy(std::span<const double> x);
double rms(std::span<const double> x);
double stddev(std::span<const double> x);
double l2_norm(std::span<const double> x);
/// ||a - b|| / ||b||; returns ||a|| when b is identically zero.
double relative_l2_error(std::span<const double> a, std::span<const double> b);
Series remove_mean(std::span<const double> x);
bool all_finite(std::span<const double> x);

/// Number of worker threads: TRU_RM_THREADS when set, else hardware concurrency.
std::size_t worker_count();

/// Runs body(i) for i in [0, n) across worker threads. Results must be written
/// to index-addressed storage so reductions stay order-independent.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace trurm
