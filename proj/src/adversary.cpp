#include "trurm/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "trurm/fft.hpp"

namespace trurm {

namespace {

constexpr Band kFeatureBand{0.1, 4.0};
constexpr Band kShapeBand{0.1, 1.5};
constexpr std::size_t kPaddedFft = 8192;

double interp(std::span<const double> x, double pos) {
  const double clamped = std::clamp(pos, 0.0, static_cast<double>(x.size() - 1));
  const auto i = static_cast<std::size_t>(std::floor(clamped));
  if (i + 1 >= x.size()) return x.back();
  const double f = clamped - static_cast<double>(i);
  return x[i] * (1.0 - f) + x[i + 1] * f;
}

}  // namespace

std::array<double, IdFeatureVector::kDim> IdFeatureVector::as_array() const {
  std::array<double, kDim> out{};
  std::size_t i = 0;
  for (double v : band_energies) out[i++] = v;
  for (double v : harmonic_ratios) out[i++] = v;
  out[i++] = duty_ratio;
  for (double v : cycle_template) out[i++] = v;
  out[i++] = spectral_centroid;
  return out;
}

Series upward_zero_crossings(std::span<const double> x) {
  Series out;
  for (std::size_t i = 0; i + 1 < x.size(); ++i)
    if (x[i] < 0.0 && x[i + 1] >= 0.0)
      out.push_back(static_cast<double>(i) + x[i] / (x[i] - x[i + 1]));
  return out;
}

Series brickwall_bandpass(std::span<const double> x, double sample_rate, Band band) {
  const std::size_t n = x.size();
  ComplexSeries spec = rfft(remove_mean(x));
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t kk = std::min(k, n - k);
    if (!band.contains(bin_frequency(kk, n, sample_rate))) spec[k] = 0.0;
  }
  return ifft_real(spec);
}

IdFeatureVector extract_id_features(std::span<const double> segment, double sample_rate) {
  require(segment.size() >= 8 && sample_rate > 0, "extract_id_features: segment too short");
  require(all_finite(segment), "extract_id_features: non-finite input");
  const std::size_t n = segment.size();
  const Series centered = remove_mean(segment);
  IdFeatureVector f;

  // Unwindowed periodogram: band energies and centroid.
  const ComplexSeries X = rfft(centered);
  std::array<double, IdFeatureVector::kBands + 1> edges{};
  for (std::size_t i = 0; i <= IdFeatureVector::kBands; ++i)
    edges[i] = kFeatureBand.low_hz *
               std::pow(kFeatureBand.high_hz / kFeatureBand.low_hz,
                        static_cast<double>(i) / IdFeatureVector::kBands);
  std::array<double, IdFeatureVector::kBands> e{};
  double total = 0.0;
  double centroid_num = 0.0;
  for (std::size_t k = 1; k <= n / 2; ++k) {
    const double fr = bin_frequency(k, n, sample_rate);
    if (fr < edges.front() || fr >= edges.back()) continue;
    const double p = std::norm(X[k]);
    const auto band = static_cast<std::size_t>(
        std::upper_bound(edges.begin(), edges.end(), fr) - edges.begin() - 1);
    e[std::min(band, IdFeatureVector::kBands - 1)] += p;
    total += p;
    centroid_num += fr * p;
  }
  for (std::size_t i = 0; i < IdFeatureVector::kBands; ++i)
    f.band_energies[i] = std::log10((total > 0 ? e[i] / total : 0.0) + 1e-12);
  f.spectral_centroid = total > 0 ? centroid_num / total : 0.0;

  // Harmonic ratios from a Hann-windowed, zero-padded spectrum.
  const Series w = hann_window(n);
  Series xw(n);
  for (std::size_t i = 0; i < n; ++i) xw[i] = centered[i] * w[i];
  const std::size_t nfft = std::max(kPaddedFft, next_pow2(n));
  const ComplexSeries Xp = rfft(xw, nfft);
  auto mag_near = [&](double hz) {
    const double pos = hz * static_cast<double>(nfft) / sample_rate;
    const double spread = static_cast<double>(nfft) / static_cast<double>(n);  // one raw bin
    const auto lo = static_cast<std::size_t>(std::max(0.0, std::floor(pos - spread)));
    const auto hi = std::min(nfft / 2, static_cast<std::size_t>(std::ceil(pos + spread)));
    double best = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) best = std::max(best, std::abs(Xp[k]));
    return best;
  };
  double f0 = 0.0;
  double a0 = 0.0;
  for (std::size_t k = 1; k <= nfft / 2; ++k) {
    const double fr = bin_frequency(k, nfft, sample_rate);
    if (!kRespirationBand.contains(fr)) continue;
    if (std::abs(Xp[k]) > a0) {
      a0 = std::abs(Xp[k]);
      f0 = fr;
    }
  }
  for (std::size_t h = 0; h < IdFeatureVector::kHarmonics; ++h) {
    const double hz = f0 * static_cast<double>(h + 2);
    f.harmonic_ratios[h] = (a0 > 0 && hz < sample_rate / 2) ? mag_near(hz) / a0 : 0.0;
  }

  // Morphology from the 0.1-1.5 Hz signal, cycles anchored on the resp-band one.
  const Series shape = brickwall_bandpass(segment, sample_rate, kShapeBand);
  const Series resp = brickwall_bandpass(segment, sample_rate, kRespirationBand);
  std::size_t rise = 0;
  std::size_t fall = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double d = shape[i + 1] - shape[i];
    if (d > 0) ++rise;
    if (d < 0) ++fall;
  }
  f.duty_ratio = fall > 0 ? static_cast<double>(rise) / static_cast<double>(fall) : 1.0;

  const Series zc = upward_zero_crossings(resp);
  std::size_t cycles = 0;
  std::array<double, IdFeatureVector::kTemplate> acc{};
  for (std::size_t c = 0; c + 1 < zc.size(); ++c) {
    const double start = zc[c];
    const double len = zc[c + 1] - start;
    for (std::size_t j = 0; j < IdFeatureVector::kTemplate; ++j)
      acc[j] += interp(shape, start + len * static_cast<double>(j) / IdFeatureVector::kTemplate);
    ++cycles;
  }
  if (cycles > 0) {
    double norm = 0.0;
    for (double v : acc) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > 0) {
      for (std::size_t j = 0; j < acc.size(); ++j) f.cycle_template[j] = acc[j] / norm;
      f.valid = true;
    }
  }
  return f;
}

Series IdClassifier::predict_proba(const IdFeatureVector& f) const {
  const auto x = f.as_array();
  std::array<double, IdFeatureVector::kDim> z{};
  for (std::size_t d = 0; d < z.size(); ++d) z[d] = (x[d] - feature_mean[d]) / feature_scale[d];
  Series logits(classes());
  for (std::size_t c = 0; c < classes(); ++c) {
    double s = biases[c];
    for (std::size_t d = 0; d < z.size(); ++d) s += weights[c][d] * z[d];
    logits[c] = s;
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double tot = 0.0;
  for (double& v : logits) tot += v = std::exp(v - mx);
  for (double& v : logits) v /= tot;
  return logits;
}

int IdClassifier::predict(const IdFeatureVector& f) const {
  const Series p = predict_proba(f);
  return class_labels[static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin())];
}

IdClassifier train_classifier(const std::vector<LabeledFeatures>& data, const TrainingMeta& meta) {
  require(meta.epochs >= 1 && meta.learning_rate >= 0 && meta.l2 >= 0,
          "train_classifier: invalid training settings");
  std::map<int, std::size_t> counts;
  for (const auto& d : data) ++counts[d.label];
  require(counts.size() >= 2, "train_classifier: need at least two classes");
  for (const auto& [label, c] : counts)
    require(c >= 4, "train_classifier: need at least 4 samples per class");

  constexpr std::size_t D = IdFeatureVector::kDim;
  IdClassifier clf;
  clf.meta = meta;
  for (const auto& [label, c] : counts) clf.class_labels.push_back(label);
  const std::size_t C = clf.classes();
  const std::size_t N = data.size();
  std::map<int, std::size_t> index;
  for (std::size_t c = 0; c < C; ++c) index[clf.class_labels[c]] = c;

  std::vector<std::array<double, D>> X(N);
  std::vector<std::size_t> y(N);
  for (std::size_t i = 0; i < N; ++i) {
    X[i] = data[i].features.as_array();
    y[i] = index[data[i].label];
  }
  for (std::size_t d = 0; d < D; ++d) {
    double s = 0.0;
    double s2 = 0.0;
    for (const auto& x : X) {
      s += x[d];
      s2 += x[d] * x[d];
    }
    const double mu = s / static_cast<double>(N);
    const double var = std::max(s2 / static_cast<double>(N) - mu * mu, 0.0);
    clf.feature_mean[d] = mu;
    clf.feature_scale[d] = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
  for (auto& x : X)
    for (std::size_t d = 0; d < D; ++d) x[d] = (x[d] - clf.feature_mean[d]) / clf.feature_scale[d];

  clf.weights.assign(C, std::array<double, D>{});
  clf.biases.assign(C, 0.0);
  std::vector<std::array<double, D>> gw(C);
  Series gb(C);
  Series logits(C);
  const double inv_n = 1.0 / static_cast<double>(N);
  for (std::size_t epoch = 0; epoch < meta.epochs; ++epoch) {
    for (auto& g : gw) g.fill(0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    for (std::size_t i = 0; i < N; ++i) {
      double mx = -1e300;
      for (std::size_t c = 0; c < C; ++c) {
        double s = clf.biases[c];
        for (std::size_t d = 0; d < D; ++d) s += clf.weights[c][d] * X[i][d];
        logits[c] = s;
        mx = std::max(mx, s);
      }
      double tot = 0.0;
      for (double& v : logits) tot += v = std::exp(v - mx);
      for (std::size_t c = 0; c < C; ++c) {
        const double r = logits[c] / tot - (c == y[i] ? 1.0 : 0.0);
        gb[c] += r;
        for (std::size_t d = 0; d < D; ++d) gw[c][d] += r * X[i][d];
      }
    }
    for (std::size_t c = 0; c < C; ++c) {
      clf.biases[c] -= meta.learning_rate * gb[c] * inv_n;
      for (std::size_t d = 0; d < D; ++d)
        clf.weights[c][d] -=
            meta.learning_rate * (gw[c][d] * inv_n + meta.l2 * clf.weights[c][d]);
    }
  }
  return clf;
}

AttackReport evaluate_classifier(const IdClassifier& classifier,
                                 const std::vector<LabeledFeatures>& test) {
  require(!test.empty(), "irac: empty test set");
  AttackReport r;
  r.class_labels = classifier.class_labels;
  std::map<int, std::size_t> index;
  for (std::size_t c = 0; c < r.class_labels.size(); ++c) index[r.class_labels[c]] = c;
  for (const auto& t : test)
    if (!index.count(t.label)) {
      index[t.label] = r.class_labels.size();
      r.class_labels.push_back(t.label);
    }
  const std::size_t C = r.class_labels.size();
  r.confusion.assign(C, std::vector<std::size_t>(C, 0));
  std::size_t correct = 0;
  for (const auto& t : test) {
    const int p = classifier.predict(t.features);
    r.predictions.push_back(p);
    ++r.confusion[index[t.label]][index[p]];
    if (p == t.label) ++correct;
  }
  r.irac = static_cast<double>(correct) / static_cast<double>(test.size());
  r.per_class_accuracy.assign(C, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    std::size_t row = 0;
    for (auto v : r.confusion[c]) row += v;
    r.per_class_accuracy[c] = row > 0 ? static_cast<double>(r.confusion[c][c]) / static_cast<double>(row) : 0.0;
  }
  return r;
}

double irac(const IdClassifier& classifier, const std::vector<LabeledFeatures>& test) {
  return evaluate_classifier(classifier, test).irac;
}

}  // namespace trurm
