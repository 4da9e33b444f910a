#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mspm/pipeline/report.hpp"

using namespace mspm;

namespace {

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kPrerequisite = 3, kNumerical = 4 };

struct Options {
  std::string config;
  std::string out;
  std::string stage;
  std::optional<std::uint64_t> seed_override;
  std::size_t jobs = 1;
};

pipeline::ExperimentConfig effective_config(const Options& o, bool required = true) {
  pipeline::ExperimentConfig c;
  if (o.config.empty()) {
    if (required) throw ConfigError("--config is required");
    c = pipeline::default_config();
  } else {
    c = pipeline::load_config(o.config);
  }
  if (!o.out.empty()) c.output_dir = o.out;
  if (o.seed_override) pipeline::override_seeds(c, *o.seed_override);
  c.validate();
  return c;
}

int dispatch(const std::string& command, const Options& o) {
  if (command == "print-defaults") {
    std::cout << pipeline::config_json(effective_config(o, false)).dump(2) << "\n";
    return kOk;
  }
  const auto cfg = effective_config(o);
  if (command == "synth") {
    const auto dir = std::filesystem::path(cfg.output_dir) / "synth";
    for (const auto& f : pipeline::write_synthetic(cfg, dir)) std::cout << f << "\n";
    return kOk;
  }
  pipeline::Pipeline p(cfg, o.jobs);
  if (command == "run") {
    if (o.stage.empty()) p.run_all();
    else p.run_stage(o.stage);
  } else {
    p.run_stage(command);
  }
  std::cout << "report " << (p.root() / "report.json").string() << " digest " << p.manifest().report_digest << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-tier RL portfolio engine: per-asset trading signals feeding a portfolio allocator"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config, "experiment config (JSON)");
  app.add_option("--out", o.out, "output directory (overrides output_dir)");
  app.add_option("--seed-override", o.seed_override, "replace every named seed, derived from this value");
  app.add_option("--jobs", o.jobs, "worker threads for per-asset and per-portfolio work")->check(CLI::PositiveNumber);
  app.add_option("--stage", o.stage, "with `run`: run only this stage");

  const std::pair<const char*, const char*> commands[] = {
      {"ingest", "load, align and gap-fill the data sources"},
      {"synth", "write the synthetic market as raw price/sentiment CSVs"},
      {"train-eam", "train one signal agent per distinct symbol"},
      {"gen-signals", "emit daily signals over the prediction range"},
      {"train-sam", "train one allocator per portfolio"},
      {"backtest", "run the trained allocators over the experiment range"},
      {"baseline", "run CRP/BAH/EG/FTRL over the experiment range"},
      {"compare", "metric table, value curves and drawdown series"},
      {"stats", "RstdDRR stability protocol against the reference strategy"},
      {"ablate", "paired runs with and without signals"},
      {"print-defaults", "print the full default config"},
      {"run", "run every planned stage (or one with --stage)"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  if (!o.stage.empty() && command != "run") {
    std::cerr << "error: --stage only applies to `run`\n";
    return kConfig;
  }
  if (!o.stage.empty() && !pipeline::is_stage(o.stage)) {
    std::cerr << "error: unknown stage '" << o.stage << "'\n";
    return kConfig;
  }
  try {
    return dispatch(command, o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const PrerequisiteError& e) {
    std::cerr << "missing prerequisite: " << e.what() << "\n";
    return kPrerequisite;
  } catch (const NumericalError& e) {
    std::cerr << "numerical divergence: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOther;
  }
}
