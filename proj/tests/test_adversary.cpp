#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "test_util.hpp"
#include "trurm/adversary.hpp"
#include "trurm/signal_sim.hpp"

using namespace trurm;

namespace {

LabeledFeatures point(double a, double b, int label) {
  LabeledFeatures f;
  f.features.band_energies[0] = a;
  f.features.band_energies[1] = b;
  f.features.valid = true;
  f.label = label;
  return f;
}

Series persona_segment(const PersonaProfile& p, std::uint64_t seed) {
  return synth_displacement(p, 20.0, 20.0, seed).displacement_m;
}

}  // namespace

TEST_SUITE("adversary") {
  TEST_CASE("zero crossings") {
    const Series x{-1.0, 1.0, -1.0, -1.0, 3.0};
    const Series z = upward_zero_crossings(x);
    REQUIRE(z.size() == 2);
    CHECK(z[0] == doctest::Approx(0.5));
    CHECK(z[1] == doctest::Approx(3.25));
  }

  TEST_CASE("brick-wall bandpass keeps only the band") {
    const Series x = testutil::add(testutil::tone(0.25, 20.0, 400), testutil::tone(2.0, 20.0, 400));
    const Series y = brickwall_bandpass(x, 20.0, kRespirationBand);
    CHECK(testutil::rel_err(y, testutil::tone(0.25, 20.0, 400)) < 1e-9);
  }

  TEST_CASE("pure sinusoid has unit duty ratio") {
    const IdFeatureVector f = extract_id_features(testutil::tone(0.25, 20.0, 400), 20.0);
    CHECK(f.valid);
    CHECK(f.duty_ratio == doctest::Approx(1.0).epsilon(0.05));
  }

  TEST_CASE("second harmonic shows up in the harmonic ratios") {
    PersonaProfile a;
    a.resp_rate_hz = 0.25;
    a.resp_amplitude_m = 1.0;
    PersonaProfile b = a;
    b.harmonics = {{2, 0.4, 0.0}};
    const IdFeatureVector fa = extract_id_features(persona_segment(a, 1), 20.0);
    const IdFeatureVector fb = extract_id_features(persona_segment(b, 1), 20.0);
    CHECK(fb.harmonic_ratios[0] > 3.0 * fa.harmonic_ratios[0]);
  }

  TEST_CASE("features are shift invariant") {
    const Series x = testutil::add(testutil::tone(0.25, 20.0, 800), testutil::tone(0.5, 20.0, 800, 0.3, 0.7));
    const Series a(x.begin(), x.begin() + 400);
    const Series b(x.begin() + 80, x.begin() + 480);  // one full cycle later
    const auto fa = extract_id_features(a, 20.0).as_array();
    const auto fb = extract_id_features(b, 20.0).as_array();
    double d = 0.0;
    for (std::size_t i = 0; i < fa.size(); ++i) d += (fa[i] - fb[i]) * (fa[i] - fb[i]);
    CHECK(std::sqrt(d) < 1e-3);
  }

  TEST_CASE("features handle flat input") {
    const IdFeatureVector f = extract_id_features(Series(400, 0.0), 20.0);
    CHECK(!f.valid);
    for (double v : f.as_array()) CHECK(std::isfinite(v));
    CHECK_THROWS_AS(extract_id_features(Series(4, 0.0), 20.0), Error);
  }

  TEST_CASE("separable toy set is learned exactly and deterministically") {
    std::vector<LabeledFeatures> data;
    for (int i = 0; i < 20; ++i) {
      data.push_back(point(-1.0 - 0.1 * i, 0.05 * i, 3));
      data.push_back(point(1.0 + 0.1 * i, -0.05 * i, 8));
    }
    const IdClassifier c = train_classifier(data);
    CHECK(irac(c, data) == 1.0);
    const IdClassifier c2 = train_classifier(data);
    CHECK(c.weights == c2.weights);
    CHECK(c.biases == c2.biases);
    const Series p = c.predict_proba(data[0].features);
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0));
    const AttackReport r = evaluate_classifier(c, data);
    CHECK(r.class_labels == std::vector<int>{3, 8});
    CHECK(r.confusion[0][0] == 20);
    CHECK(r.confusion[1][1] == 20);
  }

  TEST_CASE("classifier preconditions") {
    std::vector<LabeledFeatures> one;
    for (int i = 0; i < 5; ++i) one.push_back(point(i, 0, 1));
    CHECK_THROWS_AS(train_classifier(one), Error);
  }

  TEST_CASE("constant predictor on a balanced binary set scores one half") {
    std::vector<LabeledFeatures> train;
    for (int i = 0; i < 10; ++i) {
      train.push_back(point(-1.0, 0.0, 0));
      train.push_back(point(1.0, 0.0, 1));
    }
    const IdClassifier c = train_classifier(train);
    std::vector<LabeledFeatures> test;
    for (int i = 0; i < 10; ++i) {
      test.push_back(point(-1.0, 0.0, 0));
      test.push_back(point(-1.0, 0.0, 1));
    }
    CHECK(irac(c, test) == 0.5);
  }

  TEST_CASE("shuffled labels give chance accuracy") {
    const auto personas = default_cohort(13);
    std::vector<LabeledFeatures> all;
    for (const auto& p : personas)
      for (std::uint64_t s = 0; s < 12; ++s) {
        PersonaProfile q = p;
        q.micromotion_std_m = 0.0;
        all.push_back({extract_id_features(persona_segment(q, 100 * p.id_label + s), 20.0), p.id_label});
      }
    std::mt19937_64 rng(17);
    double acc = 0.0;
    const int reps = 5;
    for (int r = 0; r < reps; ++r) {
      std::vector<int> labels;
      for (const auto& f : all) labels.push_back(f.label);
      std::shuffle(labels.begin(), labels.end(), rng);
      std::vector<LabeledFeatures> train;
      std::vector<LabeledFeatures> test;
      for (std::size_t i = 0; i < all.size(); ++i) {
        LabeledFeatures f = all[i];
        f.label = labels[i];
        (i % 3 == 0 ? test : train).push_back(f);
      }
      acc += irac(train_classifier(train, TrainingMeta{200, 0.5, 1e-4, 0}), test);
    }
    CHECK(std::abs(acc / reps - 1.0 / 13.0) <= 0.05);
  }
}
