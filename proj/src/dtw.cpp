#include "trurm/dtw.hpp"

#include <algorithm>
#include <limits>

namespace trurm {

double dtw_distance(std::span<const double> a, std::span<const double> b) {
  require(!a.empty() && !b.empty(), "dtw_distance: empty series");
  const double inf = std::numeric_limits<double>::infinity();
  const std::size_t m = b.size();
  std::vector<double> prev(m + 1, inf);
  std::vector<double> cur(m + 1, inf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = inf;
    const double ai = a[i - 1];
    double left = inf;
    for (std::size_t j = 1; j <= m; ++j) {
      const double d = ai - b[j - 1];
      left = d * d + std::min(std::min(prev[j], left), prev[j - 1]);
      cur[j] = left;
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

}  // namespace trurm
