// avshap: per-token audio-visual Shapley attribution from the command line.
//
//   avshap attribute --config run.toml
//   avshap sweep     --config run.toml --workers 8 --out reports/snr
//   avshap ablate    --config run.toml
//   avshap selftest
//
// Exit status: 0 ok (per-utterance failures are listed in the report),
// 2 configuration problem, 3 scorer unusable, 1 selftest failure.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "avshap/error.hpp"
#include "avshap/run.hpp"
#include "avshap/selftest.hpp"
#include "avshap/wer.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitOracle = 3;

struct RunFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
  std::optional<std::size_t> budget;
  std::optional<std::string> out;
  std::optional<std::string> format;
  std::optional<std::size_t> workers;
  std::vector<std::string> utterances;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config, "run configuration file")->required();
  cmd->add_option("--seed", f.seed, "estimator seed");
  cmd->add_option("--method", f.method, "exact|permutation|sampling");
  cmd->add_option("--budget", f.budget, "evaluation budget M");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--format", f.format, "comma-separated report formats (csv,json)");
  cmd->add_option("--workers", f.workers, "utterance worker pool size (0 = all cores)");
  cmd->add_option("--utterance", f.utterances, "restrict to these utterance ids");
}

avshap::RunConfig resolve(const RunFlags& f) {
  avshap::RunConfig c = avshap::load_run_config(f.config);
  if (f.seed) c.estimator.seed = *f.seed;
  if (f.method) c.estimator.method = avshap::parse_method(*f.method);
  if (f.budget) c.estimator.budget_m = *f.budget;
  if (f.out) c.out_dir = *f.out;
  if (f.workers) c.workers = *f.workers;
  if (!f.utterances.empty()) c.utterance_filter = f.utterances;
  if (f.format) {
    c.report.csv = c.report.json = false;
    std::string rest = *f.format;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const std::string item = rest.substr(0, comma);
      if (item == "csv") {
        c.report.csv = true;
      } else if (item == "json") {
        c.report.json = true;
      } else {
        throw avshap::ConfigError("unknown report format '" + item + "' (expected csv or json)");
      }
      rest = comma == std::string::npos ? "" : rest.substr(comma + 1);
    }
  }
  c.validate();
  return c;
}

int run_mode(const RunFlags& f, avshap::RunMode mode) {
  const auto config = resolve(f);
  avshap::run_and_write(config, mode, &std::cout);
  std::cout << "report written to " << config.out_dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Per-token Shapley attribution for audio-visual speech recognisers"};
  app.require_subcommand(1);

  RunFlags attribute_flags, sweep_flags, ablate_flags;
  add_run_flags(app.add_subcommand("attribute", "attribute one utterance"), attribute_flags);
  add_run_flags(app.add_subcommand("sweep", "attribute every utterance / grid point"), sweep_flags);
  add_run_flags(app.add_subcommand("ablate", "modality-drop ablation only"), ablate_flags);

  auto* selftest = app.add_subcommand("selftest", "run the built-in verification suite");
  std::string scratch;
  selftest->add_option("--scratch", scratch, "scratch directory for report checks");

  auto* wer_cmd = app.add_subcommand("wer", "word error rate of a hypothesis against a reference");
  std::string reference, hypothesis;
  wer_cmd->add_option("--ref", reference, "reference transcript")->required();
  wer_cmd->add_option("--hyp", hypothesis, "hypothesis transcript")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (app.got_subcommand("attribute")) return run_mode(attribute_flags, avshap::RunMode::Attribute);
    if (app.got_subcommand("sweep")) return run_mode(sweep_flags, avshap::RunMode::Sweep);
    if (app.got_subcommand("ablate")) return run_mode(ablate_flags, avshap::RunMode::Ablate);
    if (app.got_subcommand("wer")) {
      std::cout << avshap::wer(reference, hypothesis) << "\n";
      return 0;
    }
    avshap::selftest::Options opts;
    opts.scratch_dir = scratch;
    opts.info = &std::cout;
    bool ok = true;
    for (const auto& r : avshap::selftest::run_all(opts)) {
      std::cout << avshap::selftest::format_line(r) << "\n";
      ok = ok && r.passed;
    }
    return ok ? 0 : 1;
  } catch (const avshap::ConfigError& e) {
    std::cerr << "avshap: config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const avshap::BridgeError& e) {
    std::cerr << "avshap: scorer error: " << e.what() << "\n";
    return kExitOracle;
  } catch (const avshap::Error& e) {
    std::cerr << "avshap: " << e.what() << "\n";
    return 1;
  }
}
