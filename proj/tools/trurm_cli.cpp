#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "trurm/trurm.h"

namespace {

int report(trurm_status s) {
  if (s == TRURM_OK) return 0;
  std::fprintf(stderr, "trurm: %s: %s\n", trurm_status_name(s), trurm_last_error());
  return static_cast<int>(s);
}

const char* opt_cstr(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

bool parse_band(const std::string& text, double& lo, double& hi) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) return false;
  try {
    lo = std::stod(text.substr(0, colon));
    hi = std::stod(text.substr(colon + 1));
  } catch (const std::exception&) {
    return false;
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Respiration monitoring with keyed identity perturbation"};
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 1;
  bool seed_given = false;
  std::string config;
  std::string out;
  app.add_option_function<std::uint64_t>(
         "--seed", [&](const std::uint64_t& v) { seed = v; seed_given = true; }, "Random seed")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--config", config, "Configuration JSON")->check(CLI::ExistingFile);
  app.add_option("--out", out, "Output path")->required();

  int rc = 0;

  // simulate
  auto* sim = app.add_subcommand("simulate", "Synthesise a radar cube, or a cohort with --cohort");
  std::string persona;
  std::size_t persona_index = 0;
  double duration = 60.0;
  double distance = 0.5;
  bool cohort_mode = false;
  std::size_t personas = 0;
  std::size_t sessions = 0;
  sim->add_option("--persona", persona, "Persona JSON")->check(CLI::ExistingFile);
  sim->add_option("--persona-index", persona_index, "Built-in persona index");
  sim->add_option("--duration", duration, "Capture length in seconds");
  sim->add_option("--distance", distance, "Target distance in metres (sets SNR)");
  sim->add_flag("--cohort", cohort_mode, "Write a decomposed cohort directory to --out");
  sim->add_option("--personas", personas, "Cohort personas");
  sim->add_option("--sessions", sessions, "Cohort sessions per persona");
  sim->callback([&] {
    if (cohort_mode) {
      trurm_cohort_options o;
      trurm_cohort_options_init(&o);
      o.config_path = opt_cstr(config);
      o.personas = personas;
      o.sessions = sessions;
      o.seed = seed;
      o.seed_set = seed_given;
      rc = report(trurm_simulate_cohort(&o, out.c_str()));
      return;
    }
    trurm_simulate_options o;
    trurm_simulate_options_init(&o);
    o.radar_config_path = opt_cstr(config);
    o.persona_path = opt_cstr(persona);
    o.persona_index = persona_index;
    o.duration_s = duration;
    o.seed = seed;
    o.distance_m = distance;
    rc = report(trurm_simulate(&o, out.c_str()));
  });

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "Cube to unwrapped, windowed phase segments");
  std::string in;
  double window = 20.0;
  double overlap = 0.5;
  std::size_t exclude_dc = 2;
  pre->add_option("--in", in, "Cube payload path")->required();
  pre->add_option("--window", window, "Window length in seconds");
  pre->add_option("--overlap", overlap, "Fractional overlap in [0, 1)");
  pre->add_option("--exclude-dc", exclude_dc, "Range bins skipped when picking the target");
  pre->callback([&] {
    rc = report(trurm_preprocess(in.c_str(), window, overlap, exclude_dc, out.c_str()));
  });

  // decompose
  auto* dec = app.add_subcommand("decompose", "Band split and mode decomposition");
  std::size_t K = 4;
  std::string band = "0.1:0.5";
  dec->add_option("--in", in, "Segment file")->required();
  dec->add_option("--K", K, "Number of modes");
  dec->add_option("--band", band, "Respiration band low:high in Hz");
  dec->callback([&] {
    double lo = 0;
    double hi = 0;
    if (!parse_band(band, lo, hi)) {
      std::fprintf(stderr, "trurm: --band must be low:high\n");
      rc = TRURM_E_INVALID_ARGUMENT;
      return;
    }
    rc = report(trurm_decompose(in.c_str(), K, lo, hi, out.c_str()));
  });

  // encrypt
  auto* enc = app.add_subcommand("encrypt", "Keyed amplitude and phase perturbation");
  std::string key_path;
  double beta_amp = 1.0;
  double beta_phase = 1.0;
  std::size_t epsilon = 0;
  enc->add_option("--in", in, "Decomposition file")->required();
  enc->add_option("--key", key_path, "Hex key file")->required()->check(CLI::ExistingFile);
  enc->add_option("--beta-amp", beta_amp, "Amplitude intensity");
  enc->add_option("--beta-phase", beta_phase, "Phase intensity");
  enc->add_option("--epsilon", epsilon, "Security margin in bits (default 32, or L/4 for short keys)");
  enc->callback([&] {
    trurm_key* key = nullptr;
    rc = report(trurm_key_from_file(key_path.c_str(), &key));
    if (rc) return;
    rc = report(trurm_encrypt(in.c_str(), key, beta_amp, beta_phase, epsilon, out.c_str()));
    trurm_key_free(key);
  });

  // monitor
  auto* mon = app.add_subcommand("monitor", "Respiration rate per segment");
  std::string ptn_path;
  mon->add_option("--in", in, "Encrypted, decomposition or segment file")->required();
  mon->add_option("--ptn", ptn_path, "PTN parameter JSON (default: identity)")
      ->check(CLI::ExistingFile);
  mon->callback([&] {
    trurm_ptn* ptn = nullptr;
    if (!ptn_path.empty()) {
      rc = report(trurm_ptn_load(ptn_path.c_str(), &ptn));
      if (rc) return;
    }
    rc = report(trurm_monitor(in.c_str(), ptn, out.c_str()));
    trurm_ptn_free(ptn);
  });

  // attack
  auto* att = app.add_subcommand("attack", "Train the identity adversary and score a test set");
  std::string train;
  std::string test;
  att->add_option("--train", train, "Labeled training series file")->required();
  att->add_option("--test", test, "Labeled test series file")->required();
  att->callback([&] { rc = report(trurm_attack(train.c_str(), test.c_str(), out.c_str())); });

  // sweep
  auto* sw = app.add_subcommand("sweep", "Beta grid search on a cohort, or scenario sweep");
  std::string cohort_dir;
  std::vector<std::string> grid;
  bool scenarios = false;
  std::string csv;
  std::string ptn_out;
  std::string sweep_key;
  std::size_t seeds = 1;
  trurm_sweep_options so;
  trurm_sweep_options_init(&so);
  trurm_scenario_options sc;
  trurm_scenario_options_init(&sc);
  sw->add_option("--cohort", cohort_dir, "Cohort directory from simulate --cohort");
  sw->add_option("--grid-log", grid, "beta_amp=lo:hi:n beta_phase=lo:hi:n")->expected(1, 2);
  sw->add_option("--csv", csv, "Per-point CSV output");
  sw->add_option("--ptn-out", ptn_out, "Write the calibrated PTN parameters");
  sw->add_option("--key", sweep_key, "Hex key file")->check(CLI::ExistingFile);
  sw->add_option("--epsilon", so.epsilon, "Security margin in bits");
  sw->add_option("--mae-budget", so.mae_budget_bpm, "MAE budget in bpm");
  sw->add_option("--std-budget", so.std_budget_bpm, "STD budget in bpm");
  sw->add_option("--delta-a", so.delta_a, "Minimum mean envelope DTW");
  sw->add_flag("--scenarios", scenarios, "Distance/pattern/duration sweep; --out is a prefix");
  sw->add_option("--seeds", seeds, "Scenario sweep: number of seeds from --seed");
  sw->add_option("--sessions", sc.sessions, "Scenario sweep: sessions per persona");
  sw->add_option("--beta-amp", sc.beta_amp, "Scenario sweep: amplitude intensity");
  sw->add_option("--beta-phase", sc.beta_phase, "Scenario sweep: phase intensity");
  sw->callback([&] {
    if (scenarios) {
      sc.config_path = opt_cstr(config);
      sc.first_seed = seed;
      sc.seed_count = seeds;
      rc = report(trurm_sweep_scenarios(&sc, out.c_str()));
      return;
    }
    if (cohort_dir.empty()) {
      std::fprintf(stderr, "trurm: sweep needs --cohort or --scenarios\n");
      rc = TRURM_E_INVALID_ARGUMENT;
      return;
    }
    std::string amp = so.grid_beta_amp;
    std::string phase = so.grid_beta_phase;
    for (const auto& g : grid) {
      const auto eq = g.find('=');
      const std::string name = g.substr(0, eq);
      if (eq == std::string::npos || (name != "beta_amp" && name != "beta_phase")) {
        std::fprintf(stderr, "trurm: --grid-log entries are beta_amp=lo:hi:n or beta_phase=lo:hi:n\n");
        rc = TRURM_E_INVALID_ARGUMENT;
        return;
      }
      (name == "beta_amp" ? amp : phase) = g.substr(eq + 1);
    }
    so.grid_beta_amp = amp.c_str();
    so.grid_beta_phase = phase.c_str();
    so.key_path = opt_cstr(sweep_key);
    so.csv_path = opt_cstr(csv);
    so.ptn_out_path = opt_cstr(ptn_out);
    rc = report(trurm_sweep(cohort_dir.c_str(), &so, out.c_str()));
  });

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "MAE, STD, CDF and IRAC from monitor and attack outputs");
  std::string rates;
  std::string attack;
  std::string sigma = "as-written";
  ev->add_option("--rates", rates, "Rates CSV with truth")->required();
  ev->add_option("--attack", attack, "Attack report JSON");
  ev->add_option("--sigma", sigma, "as-written or abs")
      ->check(CLI::IsMember({"as-written", "abs"}));
  ev->callback([&] {
    rc = report(trurm_evaluate(rates.c_str(), opt_cstr(attack), sigma == "as-written", out.c_str()));
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  return rc;
}
