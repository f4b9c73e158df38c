#pragma once

#include "trurm/common.hpp"

namespace trurm {

/// Classic DTW: squared pointwise cost, steps (1,0), (0,1), (1,1), full
/// alignment of both endpoints, no window constraint. O(n*m) time, O(m) memory.
double dtw_distance(std::span<const double> a, std::span<const double> b);

}  // namespace trurm
