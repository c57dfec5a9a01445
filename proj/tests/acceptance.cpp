// Acceptance suite: one PASS/FAIL line per criterion.

#include "fixtures.hpp"

#include <effbound/config.hpp>
#include <effbound/error.hpp>
#include <effbound/lan.hpp>
#include <effbound/study.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

using namespace effbound;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const Outcome& o) {
  std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << title << "): " << o.detail << std::endl;
  if (!o.pass) ++failures;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

StudyConfig loadConfig(const std::string& name) {
  std::ifstream f(std::string(EFFBOUND_CONFIG_DIR) + "/" + name);
  if (!f) throw Error(ErrorCode::ParseError, "missing config " + name);
  std::ostringstream os;
  os << f.rdbuf();
  return parseConfig(os.str());
}

// Gates whose name starts with prefix; fails if there are none.
Outcome gatesWithPrefix(const ReportBundle& b, const std::string& prefix) {
  Outcome o;
  int count = 0;
  double worst = 0.0;
  std::string worstName;
  for (const auto& g : b.gates) {
    if (g.name.rfind(prefix, 0) != 0) continue;
    ++count;
    if (!g.pass) {
      o.pass = false;
      o.detail += g.name + "=" + fmt(g.value) + " ";
    }
    const double slack = g.relation == ">=" ? g.threshold - g.value : g.value - g.threshold;
    if (worstName.empty() || slack > worst) {
      worst = slack;
      worstName = g.name + "=" + fmt(g.value) + g.relation + fmt(g.threshold);
    }
  }
  if (count == 0) return {false, "no gates named " + prefix + "*"};
  if (o.pass) o.detail = std::to_string(count) + " gates, tightest " + worstName;
  return o;
}

Table project(Table p, const Scenario& s) {
  p = p.max(0.0);
  for (int x = 0; x < s.strata(); ++x) {
    const double row = p.row(x).sum();
    if (row > 1.0) p.row(x) /= row;
  }
  if (s.constraint) {
    const auto usage = constraintUsage(s, p);
    double scale = 1.0;
    for (std::size_t k = 0; k < usage.size(); ++k)
      if (usage[k] > s.constraint->c[k]) scale = std::min(scale, s.constraint->c[k] / usage[k]);
    p *= scale;
  }
  return p;
}

Outcome neymanOptimality() {
  std::mt19937_64 g(101);
  double worstResid = 0.0;
  int gridLosses = 0;
  for (int t = 0; t < 50; ++t) {
    const Scenario s = fx::randomBinary(g, 1 + t % 5);
    const Vector e = neymanAllocation(s).p.col(1);
    const double best = evalBoundBinary(s, e).v;
    for (int x = 0; x < s.strata(); ++x) {
      const double s0 = s.outcomes.sigma2(x, 0), s1 = s.outcomes.sigma2(x, 1);
      const double a = s0 / ((1 - e(x)) * (1 - e(x))), b = s1 / (e(x) * e(x));
      worstResid = std::max(worstResid, std::abs(a - b) / std::max(a, b));
      for (int k = 1; k <= 99; ++k) {
        Vector alt = e;
        alt(x) = k / 100.0;
        if (evalBoundBinary(s, alt).v < best) ++gridLosses;
      }
    }
  }
  return {gridLosses == 0 && worstResid <= 1e-12,
          "grid losses " + std::to_string(gridLosses) + ", max relative first-order residual " + fmt(worstResid)};
}

struct Solved {
  Scenario s;
  AllocationMap alloc;
};

std::vector<Solved> solveRandom() {
  std::mt19937_64 g(202);
  std::vector<Solved> out;
  for (int t = 0; t < 25; ++t) {
    Scenario s = fx::randomConstrained(g);
    AllocationMap a = solveConstrained(s);
    out.push_back({std::move(s), std::move(a)});
  }
  return out;
}

Outcome kktCertificates(const std::vector<Solved>& solved) {
  std::mt19937_64 g(303);
  std::normal_distribution<double> z(0.0, 1.0);
  double worstKkt = 0.0;
  int violations = 0;
  for (const auto& [s, a] : solved) {
    if (!a.duals) return {false, "solver returned no duals"};
    worstKkt = std::max(worstKkt, kktResidual(s, a).max());
    const double v = evalBoundGeneral(s, a).v;
    for (int t = 0; t < 200; ++t) {
      Table d(s.strata(), s.arms());
      for (int x = 0; x < s.strata(); ++x)
        for (int w = 0; w < s.arms(); ++w) d(x, w) = z(g);
      d *= 1e-2 * std::abs(z(g)) / std::sqrt(d.square().sum());
      if (evalBoundGeneral(s, project(a.p + d, s)).v < v - 1e-10 * v) ++violations;
    }
  }
  return {worstKkt <= 1e-8 && violations == 0,
          "max KKT residual " + fmt(worstKkt) + ", improving perturbations " + std::to_string(violations) + "/5000"};
}

Outcome boundIdentity(const std::vector<Solved>& solved, const std::vector<Scenario>& extra) {
  double worst = 0.0;
  for (const auto& [s, a] : solved) worst = std::max(worst, std::abs(boundFromDuals(s, a) - evalBoundGeneral(s, a).v));
  for (const auto& s : extra) {
    const auto a = optimalAllocation(s);
    worst = std::max(worst, std::abs(boundFromDuals(s, a) - evalBoundGeneral(s, a).v));
  }
  return {worst <= 1e-8, "max |dual bound - primal bound| " + fmt(worst) + " over " +
                             std::to_string(solved.size() + extra.size()) + " instances"};
}

Outcome derivativeIdentity(const std::vector<Scenario>& scenarios) {
  double worst = 0.0;
  for (const auto& s : scenarios) {
    const auto a = optimalAllocation(s);
    const double v = evalBoundGeneral(s, a).v;
    const double d = tauDerivativeAtZero(leastFavorableSubmodel(s, a));
    worst = std::max(worst, std::abs(d - v) / v);
  }
  return {worst <= 1e-6, "max relative error " + fmt(worst)};
}

Outcome indifference() {
  const Scenario s = fx::hetero();
  const auto ney = neymanAllocation(s);
  const Submodel sub = leastFavorableSubmodel(s, ney);
  const std::vector<DesignRule> rules{{"iid", IidPropensity{ney.p}},
                                      {"blocks", StratifiedBlocks{ney.p, 4}},
                                      {"pairs", MatchedPairs{}},
                                      {"two_stage", TwoStageAdaptive{0.1, Table::Constant(3, 2, 0.5), kDefaultClipEps}},
                                      {"alternation", DeterministicAlternation{}}};
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::vector<double> info;
    for (const auto& r : rules) info.push_back(logLikelihoodRatio(sub, runOne(sub, 0.0, r, 2000, seed), 1.0).infoTildeN);
    const auto [lo, hi] = std::minmax_element(info.begin(), info.end());
    worst = std::max(worst, (*hi - *lo) / *hi);
  }
  return {worst <= 1e-12, "max relative spread of information over 5 rules, 20 samples: " + fmt(worst)};
}

Outcome reproducible(const StudyConfig& cfg, const ReportBundle& first) {
  const ReportBundle again = runStudy(cfg, StudySection::All);
  if (again.tables.size() != first.tables.size()) return {false, cfg.scenario.name + ": table count differs"};
  for (std::size_t k = 0; k < first.tables.size(); ++k)
    if (again.tables[k] != first.tables[k]) return {false, cfg.scenario.name + ": " + first.tables[k].first + " differs"};
  return {true, cfg.scenario.name + ": " + std::to_string(first.tables.size()) + " tables identical"};
}

Outcome guarded(const std::function<Outcome()>& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    return {false, std::string("exception: ") + e.what()};
  }
}

}  // namespace

int main() {
  const StudyConfig binary = loadConfig("acceptance_binary.json");
  const StudyConfig budget = loadConfig("acceptance_budget.json");

  report(1, "Neyman optimality", guarded(neymanOptimality));
  std::vector<Solved> solved;
  report(2, "KKT certificates", guarded([&] {
           solved = solveRandom();
           return kktCertificates(solved);
         }));
  report(3, "bound identity", guarded([&] { return boundIdentity(solved, {budget.scenario}); }));
  report(4, "derivative identity", guarded([&] { return derivativeIdentity({binary.scenario, budget.scenario}); }));

  ReportBundle binaryRun, budgetRun;
  const Outcome ran = guarded([&] {
    binaryRun = runStudy(binary, StudySection::All);
    budgetRun = runStudy(budget, StudySection::All);
    return Outcome{};
  });

  auto fromGates = [&](const ReportBundle& b, const std::vector<std::string>& prefixes) {
    if (!ran.pass) return ran;
    Outcome all;
    for (const auto& p : prefixes) {
      const Outcome o = gatesWithPrefix(b, p);
      all.pass = all.pass && o.pass;
      all.detail += (all.detail.empty() ? "" : "; ") + p + ": " + o.detail;
    }
    return all;
  };

  report(5, "LAN moments", fromGates(binaryRun, {"lan.moments."}));
  report(6, "expansion remainder decay", fromGates(binaryRun, {"lan.decay."}));
  report(7, "indifference", guarded(indifference));
  report(8, "Z-augmentation", fromGates(budgetRun, {"lan.augmented."}));
  report(9, "attainment and floor", fromGates(binaryRun, {"risk.attain.", "risk.floor."}));
  report(10, "reproducibility", guarded([&] {
           if (!ran.pass) return ran;
           const Outcome a = reproducible(binary, binaryRun);
           const Outcome b = reproducible(budget, budgetRun);
           return Outcome{a.pass && b.pass, a.detail + "; " + b.detail};
         }));

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
