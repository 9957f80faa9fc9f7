#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "utalfa/harness/compare.hpp"
#include "utalfa/harness/run.hpp"

namespace h = utalfa::harness;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitAbort = 3;

h::ScenarioConfig load_or_preset(const std::string& path) {
  return path.empty() ? h::figure_eight_preset() : h::load_scenario(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tracking-loop comparison harness"};
  app.require_subcommand(1);

  std::string config, arch = "alfa", out, fidelity = "sample";
  std::uint64_t seed = 1;
  auto* run = app.add_subcommand("run", "Run one architecture through a scenario");
  run->add_option("--config", config, "Scenario JSON (default: figure-eight preset)");
  run->add_option("--arch", arch, "stl | vdfll1 | vdfll2 | alfa");
  run->add_option("--seed", seed, "Run seed");
  run->add_option("--out", out, "Output directory")->required();
  run->add_option("--fidelity", fidelity, "sample | measurement");

  std::vector<std::string> reports;
  std::string cmp_out;
  auto* cmp = app.add_subcommand("compare", "Tabulate metrics reports of one scenario and seed");
  cmp->add_option("--out", cmp_out, "Output directory")->required();
  cmp->add_option("reports", reports, "metrics.json files")->required()->expected(2, -1);

  auto* scen = app.add_subcommand("scenario", "Scenario utilities");
  scen->require_subcommand(1);
  std::string preset = "figure-eight", scen_out;
  double target = 30.0;
  auto* gen = scen->add_subcommand("gen", "Write a preset scenario file");
  gen->add_option("--preset", preset, "figure-eight");
  gen->add_option("--target", target, "C/N0 after the ramp, dB-Hz");
  gen->add_option("--out", scen_out, "Scenario JSON path")->required();

  std::string exp_out;
  double exp_duration = 1.0;
  auto* exp = app.add_subcommand("export", "Write the synthesized IF as int8 I/Q with a JSON sidecar");
  exp->add_option("--config", config, "Scenario JSON (default: figure-eight preset)");
  exp->add_option("--seed", seed, "Run seed");
  exp->add_option("--duration", exp_duration, "Seconds from t = 0");
  exp->add_option("--out", exp_out, "Binary output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) {
      h::RunConfig rc;
      rc.scenario = load_or_preset(config);
      rc.scenario_path = config;
      rc.architecture = h::parse_architecture(arch);
      rc.fidelity = h::parse_fidelity(fidelity);
      rc.seed = seed;
      rc.out_dir = out;
      const auto res = h::run(rc);
      const auto& r = res.report;
      std::cout << h::to_string(r.architecture) << " seed " << r.seed << ": switch "
                << (r.switch_time ? std::to_string(*r.switch_time) + " s" : std::string("never")) << ", position rmse "
                << (r.position_rmse ? std::to_string(*r.position_rmse) + " m" : std::string("n/a")) << '\n';
    } else if (*cmp) {
      std::vector<h::MetricsReport> rs;
      for (const auto& p : reports) rs.push_back(h::load_report(p));
      const auto c = h::compare(rs);
      std::filesystem::create_directories(cmp_out);
      h::write_text(cmp_out + "/comparison.csv", c.csv);
      h::write_text(cmp_out + "/plot.json", c.plot.dump(2) + "\n");
    } else if (*scen) {
      if (preset != "figure-eight") throw h::ConfigError("unknown preset '" + preset + "'");
      h::write_text(scen_out, h::to_json(h::figure_eight_preset(target)).dump(2) + "\n");
    } else if (*exp) {
      const auto sc = load_or_preset(config);
      const h::RunSeeds seeds(seed);
      const utalfa::scenario::FigureEight traj(sc.trajectory, sc.earth);
      const auto truth = utalfa::signal::signal_truth_from_scenario(traj, sc.satellites, sc.cn0, sc.clock, seeds.bits);
      const utalfa::signal::SignalSynthesizer synth(truth, sc.signal);
      const auto n = static_cast<std::size_t>(std::llround(exp_duration * sc.signal.fs));
      h::export_if(synth, 0, n, seeds.noise, exp_out, {{"scenario_hash", h::scenario_hash(sc)}, {"seed", seed}});
    }
  } catch (const h::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const h::RunAbort& e) {
    std::cerr << "run aborted at t = " << e.t << " s, prn " << e.prn << ", " << e.stage << ": " << e.what() << '\n';
    return kExitAbort;
  }
  return 0;
}
