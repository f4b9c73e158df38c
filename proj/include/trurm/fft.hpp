#pragma once

#include "trurm/common.hpp"

namespace trurm {

/// Forward DFT, unnormalized: X[k] = sum_n x[n] e^{-j 2 pi k n / N}.
ComplexSeries fft(std::span<const Complex> x);
/// Inverse DFT with 1/N scaling.
ComplexSeries ifft(std::span<const Complex> X);
/// DFT of a real sequence zero-padded to n (n = 0 keeps the input length).
ComplexSeries rfft(std::span<const double> x, std::size_t n = 0);
/// Real part of the inverse DFT.
Series ifft_real(std::span<const Complex> X);

inline double bin_frequency(std::size_t k, std::size_t n, double sample_rate) {
  return static_cast<double>(k) * sample_rate / static_cast<double>(n);
}

/// Periodic Hann window of length n.
Series hann_window(std::size_t n);

std::size_t next_pow2(std::size_t n);

}  // namespace trurm
