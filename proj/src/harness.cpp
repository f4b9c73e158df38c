#include "trurm/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <tuple>

#include "json.hpp"
#include "trurm/io.hpp"

namespace trurm {

using nlohmann::json;

namespace {

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

ScenarioKind parse_kind(const std::string& s) {
  if (s == "distance") return ScenarioKind::Distance;
  if (s == "pattern") return ScenarioKind::Pattern;
  if (s == "duration") return ScenarioKind::Duration;
  fail(ErrorCode::Format, "unknown scenario kind '" + s + "'");
}

}  // namespace

std::string scenario_kind_name(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::Distance: return "distance";
    case ScenarioKind::Pattern: return "pattern";
    case ScenarioKind::Duration: return "duration";
  }
  return "unknown";
}

std::string Scenario::label() const {
  switch (kind) {
    case ScenarioKind::Distance: return "distance=" + fixed4(distance_m);
    case ScenarioKind::Pattern: return "pattern=" + pattern_name(pattern);
    case ScenarioKind::Duration: return "duration=" + fixed4(duration_s);
  }
  return {};
}

std::string Scenario::sort_key() const {
  char buf[128];
  double value = 0.0;
  if (kind == ScenarioKind::Distance) value = distance_m;
  if (kind == ScenarioKind::Pattern) value = static_cast<double>(pattern);
  if (kind == ScenarioKind::Duration) value = duration_s;
  std::snprintf(buf, sizeof buf, "%d|%012.4f|%020llu", static_cast<int>(kind), value,
                static_cast<unsigned long long>(seed));
  return buf;
}

MetricsReport compute_metrics(std::span<const double> pred_bpm, std::span<const double> true_bpm,
                              const std::vector<int>& id_pred, const std::vector<int>& id_truth,
                              const Scenario& scenario, bool sigma_as_written) {
  require(!pred_bpm.empty(), "compute_metrics: empty rate lists");
  require(pred_bpm.size() == true_bpm.size(), "compute_metrics: rate lists differ in length");
  require(id_pred.size() == id_truth.size(), "compute_metrics: identity lists differ in length");
  require(all_finite(pred_bpm) && all_finite(true_bpm), "compute_metrics: non-finite rate");

  MetricsReport r;
  r.scenario = scenario;
  r.n_samples = pred_bpm.size();
  r.mae_bpm = loss_r(pred_bpm, true_bpm);
  r.std_bpm = rate_error_std(pred_bpm, true_bpm, sigma_as_written);

  Series err(pred_bpm.size());
  for (std::size_t i = 0; i < err.size(); ++i) err[i] = std::abs(pred_bpm[i] - true_bpm[i]);
  std::sort(err.begin(), err.end());
  const double n = static_cast<double>(err.size());
  for (std::size_t i = 0; i < err.size(); ++i) {
    if (i + 1 < err.size() && err[i + 1] == err[i]) continue;
    r.cdf_points.emplace_back(err[i], static_cast<double>(i + 1) / n);
  }

  std::vector<int> labels(id_truth);
  labels.insert(labels.end(), id_pred.begin(), id_pred.end());
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  r.class_labels = labels;
  r.confusion.assign(labels.size(), std::vector<std::size_t>(labels.size(), 0));
  auto index_of = [&](int l) {
    return static_cast<std::size_t>(std::lower_bound(labels.begin(), labels.end(), l) - labels.begin());
  };
  std::size_t correct = 0;
  for (std::size_t i = 0; i < id_truth.size(); ++i) {
    ++r.confusion[index_of(id_truth[i])][index_of(id_pred[i])];
    if (id_pred[i] == id_truth[i]) ++correct;
  }
  r.irac = id_truth.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(id_truth.size());
  return r;
}

ScenarioConfig::ScenarioConfig() { cohort.sessions = 5; }

void ScenarioConfig::validate() const {
  require(!seeds.empty(), "ScenarioConfig: no seeds");
  require(!distances_m.empty() || !patterns.empty() || !durations_s.empty(),
          "ScenarioConfig: no scenario cells");
  for (double d : distances_m) require(d > 0, "ScenarioConfig: distance must be positive");
  for (double d : durations_s)
    require(d > 0 && d <= cohort.session_s, "ScenarioConfig: duration must be in (0, session length]");
  require(default_distance_m > 0 && default_duration_s > 0, "ScenarioConfig: invalid defaults");
  CohortConfig c = cohort;
  c.window_s = std::min(default_duration_s, c.session_s);
  c.validate();
}

std::vector<Scenario> ScenarioConfig::cells() const {
  std::vector<Scenario> out;
  for (auto seed : seeds) {
    Scenario base;
    base.distance_m = default_distance_m;
    base.pattern = default_pattern;
    base.duration_s = default_duration_s;
    base.seed = seed;
    for (double d : distances_m) {
      Scenario s = base;
      s.kind = ScenarioKind::Distance;
      s.distance_m = d;
      out.push_back(s);
    }
    for (auto p : patterns) {
      Scenario s = base;
      s.kind = ScenarioKind::Pattern;
      s.pattern = p;
      out.push_back(s);
    }
    for (double d : durations_s) {
      Scenario s = base;
      s.kind = ScenarioKind::Duration;
      s.duration_s = d;
      out.push_back(s);
    }
  }
  std::sort(out.begin(), out.end(),
            [](const Scenario& a, const Scenario& b) { return a.sort_key() < b.sort_key(); });
  return out;
}

MetricsReport run_scenario(const Scenario& scenario, const ScenarioConfig& config,
                           const ScenarioPipeline& pipeline) {
  CohortConfig cc = config.cohort;
  cc.distance_m = scenario.distance_m;
  cc.pattern = scenario.pattern;
  cc.window_s = scenario.duration_s;
  cc.seed = scenario.seed;
  const Cohort cohort = build_cohort(cc);

  PipelineConfig pc = pipeline.base;
  pc.perturbation.beta_amp = pipeline.beta_amp;
  pc.perturbation.beta_phase = pipeline.beta_phase;
  pc.ptn = calibrate_ptn(cohort);
  const PipelineRun run = run_pipeline(cohort, pc, true);

  Series pred;
  Series truth;
  for (auto i : cohort.test_indices()) {
    pred.push_back(run.pred_bpm[i]);
    truth.push_back(run.true_bpm[i]);
  }
  MetricsReport r = compute_metrics(pred, truth, run.attack.predictions, run.test_labels, scenario,
                                    config.sigma_as_written);
  r.beta_amp = pipeline.beta_amp;
  r.beta_phase = pipeline.beta_phase;
  return r;
}

std::vector<MetricsReport> run_scenario_sweep(const ScenarioConfig& config,
                                              const ScenarioPipeline& pipeline) {
  config.validate();
  const auto cells = config.cells();
  // Cells sharing (distance, pattern, duration, seed) run once.
  using Key = std::tuple<double, int, double, std::uint64_t>;
  std::map<Key, MetricsReport> done;
  std::vector<MetricsReport> out;
  out.reserve(cells.size());
  for (const auto& s : cells) {
    const Key key{s.distance_m, static_cast<int>(s.pattern), s.duration_s, s.seed};
    auto it = done.find(key);
    if (it == done.end()) it = done.emplace(key, run_scenario(s, config, pipeline)).first;
    MetricsReport r = it->second;
    r.scenario = s;
    out.push_back(std::move(r));
  }
  return out;
}

std::string reports_to_csv(const std::vector<MetricsReport>& reports) {
  std::string out =
      "scenario,kind,distance_m,pattern,duration_s,seed,n_samples,beta_amp,beta_phase,mae_bpm,"
      "std_bpm,irac\n";
  for (const auto& r : reports) {
    const Scenario& s = r.scenario;
    out += s.label() + "," + scenario_kind_name(s.kind) + "," + fixed4(s.distance_m) + "," +
           pattern_name(s.pattern) + "," + fixed4(s.duration_s) + "," + std::to_string(s.seed) +
           "," + std::to_string(r.n_samples) + "," + fixed4(r.beta_amp) + "," +
           fixed4(r.beta_phase) + "," + fixed4(r.mae_bpm) + "," + fixed4(r.std_bpm) + "," +
           fixed4(r.irac) + "\n";
  }
  return out;
}

std::string reports_to_json(const std::vector<MetricsReport>& reports) {
  json list = json::array();
  for (const auto& r : reports) {
    json cdf = json::array();
    for (const auto& [e, c] : r.cdf_points) cdf.push_back({e, c});
    list.push_back({{"scenario",
                     {{"label", r.scenario.label()},
                      {"kind", scenario_kind_name(r.scenario.kind)},
                      {"distance_m", r.scenario.distance_m},
                      {"pattern", pattern_name(r.scenario.pattern)},
                      {"duration_s", r.scenario.duration_s},
                      {"seed", r.scenario.seed}}},
                    {"n_samples", r.n_samples},
                    {"beta_amp", r.beta_amp},
                    {"beta_phase", r.beta_phase},
                    {"mae_bpm", r.mae_bpm},
                    {"std_bpm", r.std_bpm},
                    {"irac", r.irac},
                    {"cdf", cdf},
                    {"class_labels", r.class_labels},
                    {"confusion", r.confusion}});
  }
  json doc;
  doc["format"] = "trurm.metrics";
  doc["version"] = 1;
  doc["reports"] = std::move(list);
  return doc.dump(2) + "\n";
}

std::vector<MetricsReport> reports_from_json(const std::string& text) {
  std::vector<MetricsReport> out;
  try {
    const json doc = json::parse(text);
    if (doc.value("format", "") != "trurm.metrics") fail(ErrorCode::Format, "not a metrics file");
    for (const auto& j : doc.at("reports")) {
      MetricsReport r;
      const json& s = j.at("scenario");
      r.scenario.kind = parse_kind(s.at("kind").get<std::string>());
      r.scenario.distance_m = s.at("distance_m").get<double>();
      r.scenario.pattern = parse_pattern(s.at("pattern").get<std::string>());
      r.scenario.duration_s = s.at("duration_s").get<double>();
      r.scenario.seed = s.at("seed").get<std::uint64_t>();
      r.n_samples = j.at("n_samples").get<std::size_t>();
      r.beta_amp = j.at("beta_amp").get<double>();
      r.beta_phase = j.at("beta_phase").get<double>();
      r.mae_bpm = j.at("mae_bpm").get<double>();
      r.std_bpm = j.at("std_bpm").get<double>();
      r.irac = j.at("irac").get<double>();
      for (const auto& p : j.at("cdf")) r.cdf_points.emplace_back(p[0].get<double>(), p[1].get<double>());
      r.class_labels = j.at("class_labels").get<std::vector<int>>();
      r.confusion = j.at("confusion").get<std::vector<std::vector<std::size_t>>>();
      out.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::Format, std::string("metrics JSON: ") + e.what());
  }
  return out;
}

std::string reports_to_text(const std::vector<MetricsReport>& reports) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-22s %6s %9s %10s %10s %8s\n", "scenario", "seed", "samples",
                "MAE(bpm)", "STD(bpm)", "IRAC");
  out += line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof line, "%-22s %6llu %9zu %10.4f %10.4f %8.4f\n",
                  r.scenario.label().c_str(), static_cast<unsigned long long>(r.scenario.seed),
                  r.n_samples, r.mae_bpm, r.std_bpm, r.irac);
    out += line;
  }
  return out;
}

void emit_reports(const std::vector<MetricsReport>& reports, const std::string& prefix) {
  require(!reports.empty(), "emit_reports: no reports");
  const std::string csv = reports_to_csv(reports);
  const std::string js = reports_to_json(reports);
  const std::string txt = reports_to_text(reports);
  write_file_atomic(prefix + ".csv", csv);
  write_file_atomic(prefix + ".json", js);
  write_file_atomic(prefix + ".txt", txt);
}

namespace {

json point_json(const PointEvaluation& p) {
  return {{"beta_amp", p.beta_amp},
          {"beta_phase", p.beta_phase},
          {"irac", p.irac},
          {"mae_bpm", p.mae_bpm},
          {"std_bpm", p.std_bpm},
          {"dtw_mean", p.dtw_mean},
          {"losses", {{"id", p.losses.id}, {"r", p.losses.r}, {"sda", p.losses.sda}, {"mor", p.losses.mor}}},
          {"total", p.total}};
}

}  // namespace

std::string tradeoff_to_json(const TradeoffResult& r) {
  json doc;
  doc["format"] = "trurm.tradeoff";
  doc["version"] = 1;
  doc["selected"] = {{"beta_amp", r.beta_amp},
                     {"beta_phase", r.beta_phase},
                     {"irac_enc", r.irac_enc},
                     {"mae_bpm", r.mae_bpm},
                     {"std_bpm", r.std_bpm},
                     {"dtw_mean", r.dtw_mean},
                     {"index", r.chosen},
                     {"feasible", r.feasible}};
  doc["baseline"] = {{"irac_clean", r.irac_clean}, {"mae_clean_bpm", r.mae_clean}};
  json pts = json::array();
  for (const auto& p : r.points) pts.push_back(point_json(p));
  doc["points"] = std::move(pts);
  json front = json::array();
  for (auto i : r.pareto_front) {
    json p = point_json(r.points[i]);
    p["index"] = i;
    front.push_back(std::move(p));
  }
  doc["pareto_front"] = std::move(front);
  return doc.dump(2) + "\n";
}

std::string tradeoff_to_csv(const TradeoffResult& r) {
  std::string out =
      "beta_amp,beta_phase,irac,mae_bpm,std_bpm,dtw_mean,l_id,l_r,l_sda,l_mor,total,pareto,selected\n";
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    const auto& p = r.points[i];
    const bool pareto =
        std::find(r.pareto_front.begin(), r.pareto_front.end(), i) != r.pareto_front.end();
    out += fixed4(p.beta_amp) + "," + fixed4(p.beta_phase) + "," + fixed4(p.irac) + "," +
           fixed4(p.mae_bpm) + "," + fixed4(p.std_bpm) + "," + fixed4(p.dtw_mean) + "," +
           fixed4(p.losses.id) + "," + fixed4(p.losses.r) + "," + fixed4(p.losses.sda) + "," +
           fixed4(p.losses.mor) + "," + fixed4(p.total) + "," + (pareto ? "1" : "0") + "," +
           (i == r.chosen ? "1" : "0") + "\n";
  }
  return out;
}

}  // namespace trurm
