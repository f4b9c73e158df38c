#include <algorithm>
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "trurm/harness.hpp"
#include "trurm/io.hpp"

using namespace trurm;

TEST_SUITE("harness") {
  TEST_CASE("perfect predictions") {
    const Series t{15, 16, 17};
    const MetricsReport r = compute_metrics(t, t, {1, 2, 2}, {1, 2, 3}, Scenario{});
    CHECK(r.mae_bpm == 0.0);
    CHECK(r.std_bpm == 0.0);
    CHECK(r.irac == doctest::Approx(2.0 / 3.0));
    CHECK(r.class_labels == std::vector<int>{1, 2, 3});
    CHECK(r.confusion[2][1] == 1);
    REQUIRE(r.cdf_points.size() == 1);
    CHECK(r.cdf_points[0] == std::pair<double, double>{0.0, 1.0});
  }

  TEST_CASE("hand example and cdf") {
    const MetricsReport r = compute_metrics(Series{16, 18}, Series{15, 20}, {}, {}, Scenario{});
    CHECK(r.mae_bpm == doctest::Approx(1.5));
    CHECK(r.std_bpm == doctest::Approx(std::sqrt(6.25)));
    const MetricsReport a = compute_metrics(Series{16, 18}, Series{15, 20}, {}, {}, Scenario{}, false);
    CHECK(a.std_bpm == doctest::Approx(0.5));
    REQUIRE(r.cdf_points.size() == 2);
    CHECK(r.cdf_points[0].first == 1.0);
    CHECK(r.cdf_points[0].second == 0.5);
    CHECK(r.cdf_points[1].first == 2.0);
    CHECK(r.cdf_points[1].second == 1.0);
  }

  TEST_CASE("metric preconditions") {
    CHECK_THROWS_AS(compute_metrics(Series{}, Series{}, {}, {}, Scenario{}), Error);
    CHECK_THROWS_AS(compute_metrics(Series{1}, Series{1, 2}, {}, {}, Scenario{}), Error);
    CHECK_THROWS_AS(compute_metrics(Series{1}, Series{1}, {1}, {}, Scenario{}), Error);
  }

  TEST_CASE("scenario cells vary one factor and sort deterministically") {
    ScenarioConfig c;
    c.seeds = {2, 1};
    const auto cells = c.cells();
    CHECK(cells.size() == 2 * (3 + 3 + 5));
    for (std::size_t i = 1; i < cells.size(); ++i) CHECK(cells[i - 1].sort_key() < cells[i].sort_key());
    for (const auto& s : cells) {
      if (s.kind != ScenarioKind::Distance) CHECK(s.distance_m == 0.5);
      if (s.kind != ScenarioKind::Duration) CHECK(s.duration_s == 20.0);
      if (s.kind != ScenarioKind::Pattern) CHECK(s.pattern == BreathingPattern::Natural);
    }
    Scenario s;
    s.kind = ScenarioKind::Pattern;
    s.pattern = BreathingPattern::Deep;
    CHECK(s.label() == "pattern=deep");
    s.kind = ScenarioKind::Distance;
    CHECK(s.label() == "distance=0.5000");
    c.seeds.clear();
    CHECK_THROWS_AS(c.validate(), Error);
  }

  TEST_CASE("report serialisation") {
    Scenario s;
    s.kind = ScenarioKind::Duration;
    s.duration_s = 15.0;
    s.seed = 4;
    MetricsReport r = compute_metrics(Series{16, 18}, Series{15, 20}, {1, 2}, {1, 1}, s);
    r.beta_amp = 31.6;
    const std::string csv = reports_to_csv({r});
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
    CHECK(csv.rfind("scenario,kind,distance_m,pattern,duration_s,seed,n_samples", 0) == 0);
    CHECK(csv.find("duration=15.0000,duration,") != std::string::npos);
    const auto back = reports_from_json(reports_to_json({r}));
    REQUIRE(back.size() == 1);
    CHECK(back[0].mae_bpm == r.mae_bpm);
    CHECK(back[0].irac == r.irac);
    CHECK(back[0].confusion == r.confusion);
    CHECK(back[0].cdf_points == r.cdf_points);
    CHECK(back[0].scenario.sort_key() == s.sort_key());
    CHECK(reports_to_text({r}).find("duration=15.0000") != std::string::npos);

    const auto dir = std::filesystem::temp_directory_path() / "trurm_harness_test";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    const std::string prefix = (dir / "rep").string();
    emit_reports({r}, prefix);
    CHECK(read_file(prefix + ".csv") == csv);
    CHECK(std::filesystem::exists(prefix + ".json"));
    CHECK(std::filesystem::exists(prefix + ".txt"));
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("tradeoff serialisation") {
    TradeoffResult t;
    PointEvaluation p;
    p.beta_amp = 1.0;
    p.irac = 0.5;
    t.points = {PointEvaluation{}, p};
    t.pareto_front = {1};
    t.chosen = 1;
    const std::string csv = tradeoff_to_csv(t);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK(csv.rfind("beta_amp,beta_phase,irac,mae_bpm", 0) == 0);
    CHECK(tradeoff_to_json(t).find("pareto_front") != std::string::npos);
  }

  TEST_CASE("single cell runs end to end") {
    ScenarioConfig c;
    c.cohort.personas = 4;
    c.cohort.sessions = 5;
    c.cohort.session_s = 40.0;
    Scenario s;
    s.kind = ScenarioKind::Duration;
    s.duration_s = 20.0;
    const MetricsReport r = run_scenario(s, c, ScenarioPipeline{});
    CHECK(r.n_samples > 0);
    CHECK(std::isfinite(r.mae_bpm));
    CHECK(r.irac >= 0.0);
    CHECK(r.irac <= 1.0);
    CHECK(r.beta_amp == doctest::Approx(31.6227766016838));
  }
}
