#include <effbound/error.hpp>
#include <effbound/lan.hpp>
#include <effbound/study.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace effbound {

using ojson = nlohmann::ordered_json;

bool ReportBundle::pass() const {
  for (const auto& g : gates)
    if (!g.pass) return false;
  return true;
}

const std::string* ReportBundle::table(const std::string& name) const {
  for (const auto& [n, text] : tables)
    if (n == name) return &text;
  return nullptr;
}

std::string formatDouble(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

Table resolveAlloc(const AllocRef& ref, const Scenario& s, const AllocationMap& optimal) {
  Table t;
  if (ref.token == "explicit") t = *ref.table;
  else if (ref.token == "neyman") t = neymanAllocation(s).p;
  else if (ref.token == "optimal") t = optimal.p;
  else if (ref.token == "uniform") t = Table::Constant(s.strata(), s.arms(), 1.0 / s.arms());
  else throw Error(ErrorCode::InvalidArgument, "allocation '" + ref.token + "' cannot be resolved here");
  return t * ref.scale;
}

DesignRule buildDesign(const DesignSpec& spec, const Scenario& s, const AllocationMap& optimal) {
  DesignRule rule;
  rule.name = spec.name;
  if (spec.kind == "iid") rule.kind = IidPropensity{resolveAlloc(spec.alloc, s, optimal)};
  else if (spec.kind == "stratified_blocks") rule.kind = StratifiedBlocks{resolveAlloc(spec.alloc, s, optimal), spec.blockSize};
  else if (spec.kind == "matched_pairs") rule.kind = MatchedPairs{};
  else if (spec.kind == "two_stage")
    rule.kind = TwoStageAdaptive{spec.pilotFraction, resolveAlloc(spec.fallback, s, optimal), spec.clipEps};
  else if (spec.kind == "alternation") rule.kind = DeterministicAlternation{};
  else if (spec.kind == "full") rule.kind = FullTreatment{spec.arm};
  else throw Error(ErrorCode::InvalidArgument, "unknown design kind '" + spec.kind + "'");
  checkRule(rule, s);
  return rule;
}

Table designPropensity(const DesignRule& rule, const Scenario& s, const AllocationMap& optimal) {
  const int K = s.strata();
  const int W = s.arms();
  return std::visit(
      [&](const auto& k) -> Table {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, IidPropensity> || std::is_same_v<T, StratifiedBlocks>) {
          return k.alloc;
        } else if constexpr (std::is_same_v<T, TwoStageAdaptive>) {
          return optimal.p;
        } else if constexpr (std::is_same_v<T, FullTreatment>) {
          Table t = Table::Zero(K, W);
          t.col(k.arm) = 1.0;
          return t;
        } else {
          return Table::Constant(K, W, 1.0 / W);
        }
      },
      rule.kind);
}

Estimator buildEstimator(const EstimatorSpec& spec, const Scenario& s, const Table& designProp,
                         const AllocationMap& optimal) {
  Estimator est;
  est.name = spec.name;
  auto alloc = [&] { return spec.alloc.token == "design" ? Table(designProp * spec.alloc.scale) : resolveAlloc(spec.alloc, s, optimal); };
  if (spec.kind == "diff_means") est.kind = DiffMeans{};
  else if (spec.kind == "ipw_ht") est.kind = IpwHT{alloc()};
  else if (spec.kind == "ipw_hajek") est.kind = IpwHajek{alloc()};
  else if (spec.kind == "aipw_oracle") est.kind = AipwOracle{alloc()};
  else if (spec.kind == "aipw_plugin") est.kind = AipwPlugin{alloc()};
  else if (spec.kind == "stratified_means") est.kind = StratifiedMeans{};
  else throw Error(ErrorCode::InvalidArgument, "unknown estimator kind '" + spec.kind + "'");
  return est;
}

double tauDerivativeAtZero(const Submodel& sub, double step) {
  auto central = [&](double d) { return (tauAt(sub, d) - tauAt(sub, -d)) / (2.0 * d); };
  return (4.0 * central(0.5 * step) - central(step)) / 3.0;
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

class Csv {
 public:
  explicit Csv(std::initializer_list<const char*> header) {
    bool first = true;
    for (const char* h : header) {
      if (!first) os_ << ',';
      os_ << h;
      first = false;
    }
    os_ << '\n';
  }
  template <class... Ts>
  void row(const Ts&... cells) {
    bool first = true;
    ((os_ << (first ? "" : ","), put(cells), first = false), ...);
    os_ << '\n';
  }
  std::string str() const { return os_.str(); }

 private:
  void put(double v) { os_ << formatDouble(v); }
  void put(const std::string& v) { os_ << v; }
  void put(const char* v) { os_ << v; }
  void put(std::size_t v) { os_ << v; }
  void put(int v) { os_ << v; }
  std::ostringstream os_;
};

struct Context {
  const StudyConfig& cfg;
  const Scenario& s;
  std::uint64_t seed;
  RunOptions run;
  std::optional<std::size_t> repsOverride;
  AllocationMap optimal;
  BoundValue bound;
  Submodel sub;
  std::vector<DesignRule> rules;
  std::vector<Table> props;
};

void addGate(ReportBundle& b, ojson& list, std::string name, double value, const std::string& relation,
             double threshold) {
  bool pass = false;
  if (relation == "<=") pass = value <= threshold;
  else if (relation == ">=") pass = value >= threshold;
  else if (relation == "<") pass = value < threshold;
  list.push_back({{"name", name}, {"value", value}, {"relation", relation}, {"threshold", threshold}, {"pass", pass}});
  b.gates.push_back({std::move(name), value, threshold, relation, pass});
}

ojson runSolve(const Context& c, const SolveStudy& st, ReportBundle& b, ojson& gates) {
  const Scenario& s = c.s;
  ojson out;
  out["solver"] = c.optimal.meta.solver;
  out["iterations"] = c.optimal.meta.iterations;
  out["warnings"] = c.optimal.meta.warnings;
  out["bound"] = c.bound.v;
  out["var_cate"] = c.bound.varOfCate;

  Csv bounds({"scenario", "allocation", "bound", "var_cate", "propensity_term"});
  auto boundRow = [&](const std::string& label, const Table& p) {
    try {
      const BoundValue v = evalBoundGeneral(s, p);
      bounds.row(s.name, label, v.v, v.varOfCate, v.perArm.sum());
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DivisionByZeroPropensity) throw;
      const double inf = std::numeric_limits<double>::infinity();
      bounds.row(s.name, label, inf, std::nan(""), inf);
    }
  };
  boundRow("optimal", c.optimal.p);
  if (s.isAte()) boundRow("neyman", neymanAllocation(s).p);
  boundRow("uniform", Table::Constant(s.strata(), s.arms(), 1.0 / s.arms()));
  for (std::size_t d = 0; d < c.rules.size(); ++d) boundRow("design:" + c.rules[d].name, c.props[d]);

  Csv alloc({"scenario", "stratum", "label", "arm", "p", "lambda"});
  for (int x = 0; x < s.strata(); ++x)
    for (int w = 0; w < s.arms(); ++w)
      alloc.row(s.name, x, s.covariates.support[static_cast<std::size_t>(x)], w, c.optimal.p(x, w),
                c.optimal.duals ? c.optimal.duals->lambda(x) : std::nan(""));

  Csv duals({"scenario", "row", "mu", "c", "usage"});
  const std::vector<double> usage = constraintUsage(s, c.optimal.p);
  const int rows = s.constraint ? s.constraint->rows() : 0;
  for (int k = 0; k < rows; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    duals.row(s.name, k, c.optimal.duals ? c.optimal.duals->mu[kk] : std::nan(""), s.constraint->c[kk], usage[kk]);
  }

  if (c.optimal.duals) {
    const KktResidual r = kktResidual(s, c.optimal);
    out["kkt"] = {{"stationarity", r.stationarity}, {"primal", r.primal}, {"dual", r.dual},
                  {"slackness", r.slackness}, {"max", r.max()}};
    addGate(b, gates, "solve.kkt", r.max(), "<=", st.kktTol);
    const double fromDuals = boundFromDuals(s, c.optimal);
    out["bound_from_duals"] = fromDuals;
    addGate(b, gates, "solve.identity", std::abs(fromDuals - c.bound.v), "<=", st.identityTol);
  } else {
    out["kkt"] = nullptr;
  }

  const double fd = tauDerivativeAtZero(c.sub);
  const double rel = std::abs(fd - c.bound.v) / std::max(std::abs(c.bound.v), 1e-300);
  out["tau_derivative"] = fd;
  addGate(b, gates, "solve.derivative", rel, "<=", st.derivativeTol);

  b.tables.emplace_back("bounds.csv", bounds.str());
  b.tables.emplace_back("allocation.csv", alloc.str());
  b.tables.emplace_back("duals.csv", duals.str());
  return out;
}

std::size_t designIndex(const Context& c, const std::string& name) {
  for (std::size_t d = 0; d < c.rules.size(); ++d)
    if (c.rules[d].name == name) return d;
  throw Error(ErrorCode::ValidationError, "no design named '" + name + "'");
}

bool exceedsBudget(const Context& c, std::size_t d) {
  if (!c.s.constraint) return false;
  const auto usage = constraintUsage(c.s, c.props[d]);
  for (std::size_t k = 0; k < usage.size(); ++k)
    if (usage[k] > c.s.constraint->c[k] + 1e-2) return true;
  return false;
}

ojson runRisk(const Context& c, const RiskStudy& st, ReportBundle& b, ojson& gates) {
  const Scenario& s = c.s;
  const std::size_t reps = c.repsOverride.value_or(st.reps);

  std::vector<GridEntry> grid = st.grid;
  if (grid.empty()) {
    std::vector<std::string> all;
    for (const auto& e : c.cfg.estimators) all.push_back(e.name);
    for (const auto& r : c.rules) grid.push_back({r.name, all});
  }

  Csv csv({"scenario", "design", "estimator", "n", "reps", "theta", "bias", "nVar", "nMSE", "mcSE"});
  std::map<std::pair<std::string, std::string>, double> nVarAtZero;
  ojson exempt = ojson::array();
  for (const auto& entry : grid) {
    const std::size_t d = designIndex(c, entry.design);
    std::vector<Estimator> ests;
    for (const auto& name : entry.estimators) {
      const auto it = std::find_if(c.cfg.estimators.begin(), c.cfg.estimators.end(),
                                   [&](const EstimatorSpec& e) { return e.name == name; });
      if (it == c.cfg.estimators.end()) throw Error(ErrorCode::ValidationError, "no estimator named '" + name + "'");
      ests.push_back(buildEstimator(*it, s, c.props[d], c.optimal));
    }
    const bool skipFloor = exceedsBudget(c, d);
    if (skipFloor) exempt.push_back(entry.design);
    for (double theta : st.theta) {
      const auto reports = riskOverReps(ests, c.sub, theta, c.rules[d], st.n, reps, c.seed, c.run);
      for (std::size_t j = 0; j < ests.size(); ++j) {
        const RiskReport& r = reports[j];
        csv.row(s.name, entry.design, ests[j].name, r.n, r.reps, theta, r.bias, r.varianceTimesN, r.mseTimesN,
                r.mcStdError);
        if (theta != 0.0) continue;
        nVarAtZero[{entry.design, ests[j].name}] = r.varianceTimesN;
        if (!skipFloor)
          addGate(b, gates, "risk.floor." + entry.design + "." + ests[j].name, r.varianceTimesN / c.bound.v, ">=",
                  1.0 - st.floorTol);
      }
    }
  }
  for (const auto& entry : st.attain) {
    for (const auto& name : entry.estimators) {
      const auto it = nVarAtZero.find({entry.design, name});
      if (it == nVarAtZero.end())
        throw Error(ErrorCode::ValidationError,
                    "study.risk.attain: pair " + entry.design + "/" + name + " is not evaluated at theta = 0");
      addGate(b, gates, "risk.attain." + entry.design + "." + name, std::abs(it->second / c.bound.v - 1.0), "<=",
              st.attainTol);
    }
  }
  b.tables.emplace_back("risk.csv", csv.str());
  ojson out;
  out["n"] = st.n;
  out["reps"] = reps;
  out["bound"] = c.bound.v;
  out["floor_exempt"] = exempt;
  return out;
}

ojson runLan(const Context& c, const std::vector<LanStudy>& sections, ReportBundle& b, ojson& gates) {
  const Scenario& s = c.s;
  Csv csv({"scenario", "design", "h", "n", "reps", "meanEll", "varEll", "targetMean", "targetVar", "ks",
           "meanAbsRemainder", "augmented"});
  ojson out = ojson::array();
  for (const auto& st : sections) {
    const std::size_t reps = c.repsOverride.value_or(st.reps);
    const double iStar = st.iStarSource == "bound" ? c.bound.v : st.iStarValue;
    std::vector<std::size_t> designs;
    if (st.designs.empty()) {
      for (std::size_t d = 0; d < c.rules.size(); ++d) designs.push_back(d);
    } else {
      for (const auto& name : st.designs) designs.push_back(designIndex(c, name));
    }
    LanOptions opt;
    opt.augment = st.augment;
    opt.quarterCheck = false;
    opt.run = c.run;
    ojson sec;
    sec["name"] = st.name;
    sec["i_star"] = iStar;
    sec["augment"] = st.augment;
    for (std::size_t d : designs) {
      const std::string& dn = c.rules[d].name;
      std::vector<LanReport> reports;
      for (std::size_t n : st.nList) {
        const LanReport r = lanDiagnostics(c.sub, c.rules[d], st.h, n, reps, c.seed, iStar, opt);
        csv.row(s.name, dn, st.h, r.n, r.reps, r.meanEll, r.varEll, r.targetMean, r.targetVar,
                r.ksSkipped ? std::nan("") : r.ksDistance, r.meanAbsRemainder, r.augmented ? "true" : "false");
        reports.push_back(r);
      }
      const std::string prefix = "lan." + st.name + "." + dn;
      const LanReport& last = reports.back();
      if (st.momentGates && last.targetVar > 0.0) {
        addGate(b, gates, prefix + ".mean_se", std::abs(last.meanEll - last.targetMean) / last.mcSe, "<=",
                st.meanSeTol);
        addGate(b, gates, prefix + ".var_ratio", std::abs(last.varEll / last.targetVar - 1.0), "<=", st.varTol);
        addGate(b, gates, prefix + ".ks", last.ksDistance, "<=", st.ksTol);
      }
      if (st.requireDecay)
        for (std::size_t k = 1; k < reports.size(); ++k)
          addGate(b, gates, prefix + ".decay." + std::to_string(reports[k].n),
                  reports[k].meanAbsRemainder / reports[k - 1].meanAbsRemainder, "<", 1.0);
      sec["designs"].push_back(dn);
    }
    out.push_back(sec);
  }
  b.tables.emplace_back("lan.csv", csv.str());
  return out;
}

}  // namespace

ReportBundle runStudy(const StudyConfig& cfg, StudySection section, const RunOverrides& overrides) {
  const Scenario& s = cfg.scenario;
  requireValid(s);
  AllocationMap optimal = optimalAllocation(s);
  const BoundValue bound = evalBoundGeneral(s, optimal);
  Submodel sub = leastFavorableSubmodel(s, optimal);
  Context c{cfg, s, overrides.seed.value_or(cfg.seed), RunOptions{overrides.jobs}, overrides.reps,
            std::move(optimal), bound, std::move(sub), {}, {}};
  for (const auto& spec : cfg.designs) {
    c.rules.push_back(buildDesign(spec, s, c.optimal));
    c.props.push_back(designPropensity(c.rules.back(), s, c.optimal));
  }

  const bool all = section == StudySection::All;
  const bool doSolve = section == StudySection::Solve || (all && (cfg.solve || (!cfg.risk && cfg.lan.empty())));
  const bool doRisk = section == StudySection::Risk || (all && cfg.risk);
  const bool doLan = section == StudySection::Lan || (all && !cfg.lan.empty());
  if (section == StudySection::Risk && !cfg.risk)
    throw Error(ErrorCode::ValidationError, "study.risk: section missing from config");
  if (section == StudySection::Lan && cfg.lan.empty())
    throw Error(ErrorCode::ValidationError, "study.lan: section missing from config");

  ReportBundle b;
  ojson summary;
  summary["scenario"] = s.name;
  summary["bound"] = bound.v;
  ojson gates = ojson::array();
  if (doSolve) summary["solve"] = runSolve(c, cfg.solve.value_or(SolveStudy{}), b, gates);
  if (doRisk) summary["risk"] = runRisk(c, *cfg.risk, b, gates);
  if (doLan) summary["lan"] = runLan(c, cfg.lan, b, gates);
  summary["gates"] = gates;
  summary["pass"] = b.pass();
  b.summary = summary.dump(2) + "\n";

  static const char* names[] = {"solve", "risk", "lan", "all"};
  ojson manifest;
  manifest["tool"] = "effbound";
  manifest["version"] = kVersion;
  manifest["config_hash"] = hex64(cfg.configHash);
  manifest["seed"] = c.seed;
  manifest["section"] = names[static_cast<int>(section)];
  manifest["reps_override"] = overrides.reps ? ojson(*overrides.reps) : ojson(nullptr);
  ojson tables = ojson::array();
  for (const auto& t : b.tables) tables.push_back(t.first);
  manifest["tables"] = tables;
  b.manifest = manifest.dump(2) + "\n";
  return b;
}

void writeBundle(const ReportBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw Error(ErrorCode::InvalidArgument, "cannot write " + (dir / name).string());
    f << text;
  };
  for (const auto& [name, text] : bundle.tables) write(name, text);
  write("manifest.json", bundle.manifest);
  write("summary.json", bundle.summary);
}

}  // namespace effbound
