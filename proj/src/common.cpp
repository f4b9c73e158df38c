#include "trurm/common.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

namespace trurm {

double sum(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0);
}

double mean(std::span<const double> x) {
  return x.empty() ? 0.0 : sum(x) / static_cast<double>(x.size());
}

double energy(std::span<const double> x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

double rms(std::span<const double> x) {
  return x.empty() ? 0.0 : std::sqrt(energy(x) / static_cast<double>(x.size()));
}

double stddev(std::span<const double> x) {
  if (x.empty()) return 0.0;
  const double m = mean(x);
  double acc = 0.0;
  for (double v : x) acc += (v - m) * (v - m);
  return std::sqrt(acc / static_cast<double>(x.size()));
}

double l2_norm(std::span<const double> x) { return std::sqrt(energy(x)); }

double relative_l2_error(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "relative_l2_error: length mismatch");
  double num = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) num += (a[i] - b[i]) * (a[i] - b[i]);
  const double den = energy(b);
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

Series remove_mean(std::span<const double> x) {
  const double m = mean(x);
  Series out(x.begin(), x.end());
  for (double& v : out) v -= m;
  return out;
}

bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

std::size_t worker_count() {
  if (const char* env = std::getenv("TRU_RM_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<std::size_t>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          next.store(n);
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace trurm
