#include "trurm/preprocess.hpp"

#include <cmath>

#include "trurm/fft.hpp"

namespace trurm {

ComplexMatrix range_fft(const RadarCube& cube) {
  require(cube.frames > 0 && !cube.iq.empty(), "range_fft: empty cube");
  const std::size_t ns = cube.config.samples_per_chirp;
  const std::size_t nc = cube.config.chirps_per_frame;
  require(cube.iq.size() == cube.frames * nc * ns, "range_fft: cube dimensions do not match config");

  ComplexMatrix out(cube.frames, ns);
  ComplexSeries avg(ns);
  const double inv = 1.0 / static_cast<double>(nc);
  for (std::size_t f = 0; f < cube.frames; ++f) {
    // The FFT is linear, so averaging chirps first equals averaging spectra.
    std::fill(avg.begin(), avg.end(), Complex{0.0, 0.0});
    for (std::size_t c = 0; c < nc; ++c)
      for (std::size_t s = 0; s < ns; ++s) {
        const auto v = cube.at(f, c, s);
        avg[s] += Complex{v.real(), v.imag()};
      }
    for (auto& v : avg) v *= inv;
    const ComplexSeries spec = fft(avg);
    std::copy(spec.begin(), spec.end(), out.data.begin() + static_cast<std::ptrdiff_t>(f * ns));
  }
  return out;
}

TargetBin select_target_bin(const ComplexMatrix& rfft, std::size_t exclude_dc_bins,
                            double range_resolution) {
  require(rfft.rows > 0 && rfft.cols > 0, "select_target_bin: empty range profile");
  Series mean_mag(rfft.cols, 0.0);
  for (std::size_t r = 0; r < rfft.rows; ++r)
    for (std::size_t c = 0; c < rfft.cols; ++c) mean_mag[c] += std::abs(rfft(r, c));
  for (auto& v : mean_mag) v /= static_cast<double>(rfft.rows);

  TargetBin best;
  bool found = false;
  for (std::size_t c = exclude_dc_bins; c < rfft.cols; ++c) {
    if (mean_mag[c] > 0.0 && (!found || mean_mag[c] > best.mean_magnitude)) {
      best.bin_index = c;
      best.mean_magnitude = mean_mag[c];
      found = true;
    }
  }
  if (!found) fail(ErrorCode::NoTarget, "no target");
  best.range_m = static_cast<double>(best.bin_index) * range_resolution;
  return best;
}

Series extract_phase(const ComplexMatrix& rfft, const TargetBin& bin) {
  require(bin.bin_index < rfft.cols, "extract_phase: bin out of range");
  Series phase(rfft.rows);
  for (std::size_t r = 0; r < rfft.rows; ++r) {
    const Complex v = rfft(r, bin.bin_index);
    if (v == Complex{0.0, 0.0}) {
      phase[r] = 0.0;
      continue;
    }
    double p = std::atan2(v.imag(), v.real());
    if (p == -kPi) p = kPi;
    phase[r] = p;
  }
  return phase;
}

Series unwrap_phase(std::span<const double> wrapped) {
  Series out(wrapped.begin(), wrapped.end());
  double offset = 0.0;
  for (std::size_t i = 1; i < wrapped.size(); ++i) {
    const double d = wrapped[i] - wrapped[i - 1];
    if (d > kPi)
      offset -= kTwoPi * std::ceil((d - kPi) / kTwoPi);
    else if (d < -kPi)
      offset += kTwoPi * std::ceil((-d - kPi) / kTwoPi);
    out[i] = wrapped[i] + offset;
  }
  return out;
}

std::vector<PhaseSegment> segment(std::span<const double> phase, double sample_rate,
                                  double window_s, double overlap_frac,
                                  const std::string& source_id) {
  require(sample_rate > 0 && window_s > 0, "segment: window and rate must be positive");
  require(overlap_frac >= 0.0 && overlap_frac < 1.0, "segment: overlap must be in [0, 1)");
  const auto w = static_cast<std::size_t>(std::llround(window_s * sample_rate));
  require(w >= 2, "segment: window shorter than two samples");
  require(window_s * kRespirationBand.low_hz >= 1.0 - 1e-9,
          "segment: window must span the slowest respiratory period (10 s)");
  const auto hop = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(static_cast<double>(w) * (1.0 - overlap_frac))));
  require(phase.size() >= w, "segment: series shorter than window");

  const std::size_t count = (phase.size() - w) / hop + 1;
  std::vector<PhaseSegment> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    PhaseSegment s;
    const std::size_t start = i * hop;
    s.phase.assign(phase.begin() + static_cast<std::ptrdiff_t>(start),
                   phase.begin() + static_cast<std::ptrdiff_t>(start + w));
    s.sample_rate = sample_rate;
    s.start_time = static_cast<double>(start) / sample_rate;
    s.source_id = source_id;
    s.segment_index = i;
    out.push_back(std::move(s));
  }
  return out;
}

Series cube_to_phase(const RadarCube& cube, std::size_t exclude_dc_bins, TargetBin* target) {
  const ComplexMatrix rf = range_fft(cube);
  const TargetBin bin = select_target_bin(rf, exclude_dc_bins, cube.config.range_resolution());
  if (target != nullptr) *target = bin;
  return unwrap_phase(extract_phase(rf, bin));
}

void attach_truth(std::vector<PhaseSegment>& segments, const GroundTruth& truth) {
  for (auto& seg : segments) {
    const auto start = static_cast<std::size_t>(std::llround(seg.start_time * seg.sample_rate));
    const std::size_t w = seg.phase.size();
    require(start + w <= truth.resp_rate_hz.size(), "attach_truth: truth shorter than segment");
    double acc = 0.0;
    for (std::size_t j = start; j < start + w; ++j) acc += truth.resp_rate_hz[j];
    seg.truth_bpm = 60.0 * acc / static_cast<double>(w);
    seg.label = truth.id_label;
  }
}

}  // namespace trurm
