#pragma once

#include <array>
#include <cstdint>

#include "trurm/common.hpp"

namespace trurm {

struct IdFeatureVector {
  static constexpr std::size_t kBands = 8;
  static constexpr std::size_t kHarmonics = 3;
  static constexpr std::size_t kTemplate = 32;
  static constexpr std::size_t kDim = kBands + kHarmonics + 1 + kTemplate + 1;

  std::array<double, kBands> band_energies{};  // log10 relative energy
  std::array<double, kHarmonics> harmonic_ratios{};
  double duty_ratio = 1.0;
  std::array<double, kTemplate> cycle_template{};
  double spectral_centroid = 0.0;
  bool valid = false;  // false when no full cycle was found

  std::array<double, kDim> as_array() const;
};

/// Upward zero crossings (fractional sample positions) of x.
Series upward_zero_crossings(std::span<const double> x);

/// FFT brick-wall bandpass of the mean-removed series.
Series brickwall_bandpass(std::span<const double> x, double sample_rate, Band band);

IdFeatureVector extract_id_features(std::span<const double> segment, double sample_rate);

struct LabeledFeatures {
  IdFeatureVector features;
  int label = 0;
};

struct TrainingMeta {
  std::size_t epochs = 400;
  double learning_rate = 0.5;
  double l2 = 1e-4;
  std::uint64_t seed = 0;
};

struct IdClassifier {
  std::vector<int> class_labels;
  std::vector<std::array<double, IdFeatureVector::kDim>> weights;  // classes x dim
  Series biases;
  std::array<double, IdFeatureVector::kDim> feature_mean{};
  std::array<double, IdFeatureVector::kDim> feature_scale{};
  TrainingMeta meta;

  std::size_t classes() const { return class_labels.size(); }
  Series predict_proba(const IdFeatureVector& f) const;
  int predict(const IdFeatureVector& f) const;
};

/// Multinomial logistic regression on standardised features, zero
/// initialisation, full-batch gradient descent. Fully deterministic; the seed
/// is only recorded in the metadata.
IdClassifier train_classifier(const std::vector<LabeledFeatures>& data, const TrainingMeta& meta = {});

struct AttackReport {
  double irac = 0.0;
  std::vector<int> class_labels;
  Series per_class_accuracy;
  std::vector<std::vector<std::size_t>> confusion;  // row = truth, column = prediction
  std::vector<int> predictions;
};

double irac(const IdClassifier& classifier, const std::vector<LabeledFeatures>& test);
AttackReport evaluate_classifier(const IdClassifier& classifier,
                                 const std::vector<LabeledFeatures>& test);

}  // namespace trurm
