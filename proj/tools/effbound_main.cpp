#include <effbound/allocation.hpp>
#include <effbound/config.hpp>
#include <effbound/error.hpp>
#include <effbound/study.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

int exitCodeFor(effbound::ErrorCode code) {
  using effbound::ErrorCode;
  switch (code) {
    case ErrorCode::ParseError:
    case ErrorCode::ValidationError:
      return 3;
    case ErrorCode::SolverDiverged:
    case ErrorCode::UnboundedDual:
      return 4;
    default:
      return 1;
  }
}

std::string readFile(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw effbound::Error(effbound::ErrorCode::ParseError, "cannot open config " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reps;
  std::string out;
  unsigned jobs = 0;
};

void addFlags(CLI::App* sub, Flags& f, bool runFlags) {
  sub->add_option("--config", f.config, "study config (JSON)")->required()->check(CLI::ExistingFile);
  if (!runFlags) return;
  sub->add_option("--seed", f.seed, "override the config seed");
  sub->add_option("--out", f.out, "output directory (default: config 'output')");
  sub->add_option("--reps", f.reps, "override replication counts")->check(CLI::PositiveNumber);
  sub->add_option("--jobs", f.jobs, "worker threads (0: all cores)");
}

int run(effbound::StudySection section, const Flags& f) {
  const effbound::StudyConfig cfg = effbound::parseConfig(readFile(f.config));
  effbound::RunOverrides ov;
  ov.seed = f.seed;
  ov.reps = f.reps;
  ov.jobs = f.jobs;
  const effbound::ReportBundle bundle = effbound::runStudy(cfg, section, ov);
  const std::string dir = f.out.empty() ? cfg.output : f.out;
  effbound::writeBundle(bundle, dir);
  for (const auto& g : bundle.gates)
    std::cout << (g.pass ? "PASS " : "FAIL ") << g.name << ' ' << effbound::formatDouble(g.value) << ' ' << g.relation
              << ' ' << effbound::formatDouble(g.threshold) << '\n';
  std::cout << "wrote " << bundle.tables.size() << " tables to " << dir << '\n';
  return bundle.pass() ? 0 : 2;
}

int validateOnly(const Flags& f) {
  const effbound::StudyConfig cfg = effbound::parseConfig(readFile(f.config));
  const auto alloc = effbound::optimalAllocation(cfg.scenario);
  const double v = effbound::evalBoundGeneral(cfg.scenario, alloc).v;
  std::cout << "config ok: scenario '" << cfg.scenario.name << "', " << cfg.scenario.strata() << " strata, "
            << cfg.scenario.arms() << " arms, " << cfg.designs.size() << " designs, " << cfg.estimators.size()
            << " estimators; bound " << effbound::formatDouble(v) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Efficiency bounds, optimal allocations and LAN diagnostics for adaptive experiments"};
  app.require_subcommand(1);
  Flags f;
  auto* solve = app.add_subcommand("solve", "solve the optimal allocation and check its certificate");
  auto* risk = app.add_subcommand("risk", "Monte Carlo risk of estimators under designs");
  auto* lan = app.add_subcommand("lan", "likelihood-ratio expansion diagnostics");
  auto* all = app.add_subcommand("run", "run every study section present in the config");
  auto* validate = app.add_subcommand("validate", "parse and validate a config");
  for (auto* s : {solve, risk, lan, all}) addFlags(s, f, true);
  addFlags(validate, f, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) return validateOnly(f);
    if (solve->parsed()) return run(effbound::StudySection::Solve, f);
    if (risk->parsed()) return run(effbound::StudySection::Risk, f);
    if (lan->parsed()) return run(effbound::StudySection::Lan, f);
    return run(effbound::StudySection::All, f);
  } catch (const effbound::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exitCodeFor(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
