#pragma once

#include "trurm/common.hpp"

namespace trurm {

/// Analytic signal by the frequency-domain construction: positive bins
/// doubled, negative bins zeroed, DC and Nyquist kept.
ComplexSeries hilbert_analytic(std::span<const double> x);

/// |hilbert_analytic(x)|.
Series envelope(std::span<const double> x);

/// Instantaneous frequency deviation (Hz) between two analytic signals:
/// d/dt unwrap(arg(a) - arg(b)) / 2 pi, central differences inside,
/// one-sided at the ends.
Series inst_freq_deviation(std::span<const Complex> perturbed, std::span<const Complex> reference,
                           double sample_rate);

/// |FFT|^2 of the deviation series, one-sided (bins 0..n/2).
Series deviation_power_spectrum(std::span<const double> deviation);

}  // namespace trurm
