#include <effbound/config.hpp>
#include <effbound/error.hpp>
#include <effbound/rng.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace effbound {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

std::size_t editDistance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

[[noreturn]] void parseFail(const std::string& path, const std::string& msg) {
  throw Error(ErrorCode::ParseError, (path.empty() ? std::string("config") : path) + ": " + msg);
}

[[noreturn]] void invalid(const std::string& path, const std::string& msg) {
  throw Error(ErrorCode::ValidationError, path + ": " + msg);
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
std::string index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

void requireObject(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) parseFail(path, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    bool known = false;
    std::string best;
    std::size_t bestDist = static_cast<std::size_t>(-1);
    for (const char* a : allowed) {
      if (key == a) {
        known = true;
        break;
      }
      const std::size_t d = editDistance(key, a);
      if (d < bestDist) {
        bestDist = d;
        best = a;
      }
    }
    if (known) continue;
    std::string msg = "unknown key '" + key + "'";
    if (!best.empty() && bestDist <= std::max<std::size_t>(2, best.size() / 2)) msg += "; did you mean '" + best + "'?";
    parseFail(path, msg);
  }
}

double asNumber(const json& j, const std::string& path) {
  if (!j.is_number()) parseFail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) invalid(path, "must be finite");
  return v;
}

std::size_t asCount(const json& j, const std::string& path) {
  if (!j.is_number_unsigned()) parseFail(path, "expected a non-negative integer");
  return j.get<std::size_t>();
}

int asInt(const json& j, const std::string& path) {
  if (!j.is_number_integer()) parseFail(path, "expected an integer");
  return j.get<int>();
}

std::string asString(const json& j, const std::string& path) {
  if (!j.is_string()) parseFail(path, "expected a string");
  return j.get<std::string>();
}

bool asBool(const json& j, const std::string& path) {
  if (!j.is_boolean()) parseFail(path, "expected true or false");
  return j.get<bool>();
}

std::vector<double> asNumbers(const json& j, const std::string& path) {
  if (!j.is_array()) parseFail(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(asNumber(j[i], index(path, i)));
  return out;
}

std::vector<std::string> asStrings(const json& j, const std::string& path) {
  if (!j.is_array()) parseFail(path, "expected an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(asString(j[i], index(path, i)));
  return out;
}

Table asTable(const json& j, const std::string& path) {
  if (!j.is_array()) parseFail(path, "expected an array of rows");
  const std::size_t rows = j.size();
  std::size_t cols = 0;
  std::vector<std::vector<double>> data;
  for (std::size_t i = 0; i < rows; ++i) {
    data.push_back(asNumbers(j[i], index(path, i)));
    if (i == 0) cols = data.back().size();
    else if (data.back().size() != cols) invalid(index(path, i), "row length differs from first row");
  }
  Table t(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t k = 0; k < cols; ++k) t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = data[i][k];
  return t;
}

ojson tableToJson(const Table& t) {
  ojson rows = ojson::array();
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    ojson row = ojson::array();
    for (Eigen::Index k = 0; k < t.cols(); ++k) row.push_back(t(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

void requireShape(const Table& t, int rows, int cols, const std::string& path) {
  if (t.rows() != rows || t.cols() != cols) {
    std::ostringstream os;
    os << "expected a " << rows << "x" << cols << " table, got " << t.rows() << "x" << t.cols();
    invalid(path, os.str());
  }
}

Scenario scenarioFromJson(const json& j, const std::string& path) {
  requireObject(j, path, {"name", "covariates", "arms", "mu", "sigma2", "family", "functional", "constraint"});
  for (const char* key : {"covariates", "arms", "mu", "sigma2"})
    if (!j.contains(key)) parseFail(path, std::string("missing required key '") + key + "'");

  Scenario s;
  if (j.contains("name")) s.name = asString(j["name"], join(path, "name"));

  const std::string covPath = join(path, "covariates");
  const json& cov = j["covariates"];
  requireObject(cov, covPath, {"support", "probs"});
  if (!cov.contains("probs")) parseFail(covPath, "missing required key 'probs'");
  s.covariates.probs = asNumbers(cov["probs"], join(covPath, "probs"));
  if (cov.contains("support")) {
    s.covariates.support = asStrings(cov["support"], join(covPath, "support"));
  } else {
    for (std::size_t k = 0; k < s.covariates.probs.size(); ++k) s.covariates.support.push_back(std::to_string(k));
  }

  s.outcomes.arms = asInt(j["arms"], join(path, "arms"));
  s.outcomes.mu = asTable(j["mu"], join(path, "mu"));
  s.outcomes.sigma2 = asTable(j["sigma2"], join(path, "sigma2"));
  if (j.contains("family") && asString(j["family"], join(path, "family")) != "gaussian")
    invalid(join(path, "family"), "only 'gaussian' outcomes are supported");

  if (j.contains("functional")) {
    const std::string fPath = join(path, "functional");
    const json& f = j["functional"];
    if (f.is_string()) {
      if (f.get<std::string>() != "ate") invalid(fPath, "expected \"ate\" or an object with tables a and b");
      s.functional = AteFunctional{};
    } else {
      requireObject(f, fPath, {"a", "b"});
      if (!f.contains("a") || !f.contains("b")) parseFail(fPath, "general functional needs both 'a' and 'b'");
      s.functional = GeneralTau{asTable(f["a"], join(fPath, "a")), asTable(f["b"], join(fPath, "b"))};
    }
  }

  if (j.contains("constraint")) {
    const std::string cPath = join(path, "constraint");
    const json& c = j["constraint"];
    requireObject(c, cPath, {"r", "c"});
    if (!c.contains("r") || !c.contains("c")) parseFail(cPath, "constraint needs both 'r' and 'c'");
    ConstraintSpec cs;
    cs.c = asNumbers(c["c"], join(cPath, "c"));
    const json& r = c["r"];
    if (!r.is_array()) parseFail(join(cPath, "r"), "expected an array of tables");
    for (std::size_t k = 0; k < r.size(); ++k) cs.r.push_back(asTable(r[k], index(join(cPath, "r"), k)));
    s.constraint = std::move(cs);
  }

  const ValidationReport report = validate(s);
  if (!report.ok()) {
    const auto& issue = report.issues.front();
    std::string msg = issue.message;
    if (report.issues.size() > 1) msg += " (+" + std::to_string(report.issues.size() - 1) + " more)";
    invalid(join(path, issue.field), msg);
  }
  return s;
}

ojson scenarioToJson(const Scenario& s) {
  ojson j;
  j["name"] = s.name;
  j["covariates"]["support"] = s.covariates.support;
  j["covariates"]["probs"] = s.covariates.probs;
  j["arms"] = s.outcomes.arms;
  j["mu"] = tableToJson(s.outcomes.mu);
  j["sigma2"] = tableToJson(s.outcomes.sigma2);
  j["family"] = "gaussian";
  if (const auto* g = std::get_if<GeneralTau>(&s.functional)) {
    j["functional"]["a"] = tableToJson(g->a);
    j["functional"]["b"] = tableToJson(g->b);
  } else {
    j["functional"] = "ate";
  }
  if (s.constraint) {
    ojson r = ojson::array();
    for (const auto& t : s.constraint->r) r.push_back(tableToJson(t));
    j["constraint"]["r"] = std::move(r);
    j["constraint"]["c"] = s.constraint->c;
  }
  return j;
}

json parseJson(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, std::string("malformed JSON: ") + e.what());
  }
}

const std::set<std::string> kAllocTokens{"neyman", "optimal", "constrained", "uniform", "design"};

AllocRef allocFrom(const json& j, const json* scale, const Scenario& s, const std::string& path, bool allowDesign) {
  AllocRef ref;
  if (j.is_string()) {
    ref.token = j.get<std::string>();
    if (!kAllocTokens.count(ref.token) || (ref.token == "design" && !allowDesign))
      invalid(path, "unknown allocation '" + ref.token + "'");
    if (ref.token == "constrained") ref.token = "optimal";
    if (ref.token == "neyman" && !s.isAte()) invalid(path, "'neyman' requires the ATE functional");
  } else {
    ref.token = "explicit";
    ref.table = asTable(j, path);
    requireShape(*ref.table, s.strata(), s.arms(), path);
  }
  if (scale) {
    ref.scale = asNumber(*scale, path + ".scale");
    if (!(ref.scale > 0.0 && ref.scale <= 1.0)) invalid(path + ".scale", "must lie in (0, 1]");
  }
  return ref;
}

const std::set<std::string> kDesignKinds{"iid", "stratified_blocks", "matched_pairs", "two_stage", "alternation", "full"};
const std::set<std::string> kEstimatorKinds{"diff_means", "ipw_ht",      "ipw_hajek",
                                            "aipw_oracle", "aipw_plugin", "stratified_means"};

DesignSpec designFrom(const json& j, const Scenario& s, const std::string& path) {
  requireObject(j, path, {"name", "kind", "alloc", "scale", "block_size", "pilot_fraction", "fallback", "clip_eps", "arm"});
  if (!j.contains("kind")) parseFail(path, "missing required key 'kind'");
  DesignSpec d;
  d.kind = asString(j["kind"], join(path, "kind"));
  if (!kDesignKinds.count(d.kind)) invalid(join(path, "kind"), "unknown design kind '" + d.kind + "'");
  d.name = j.contains("name") ? asString(j["name"], join(path, "name")) : d.kind;
  const json* scale = j.contains("scale") ? &j["scale"] : nullptr;
  if (j.contains("alloc")) d.alloc = allocFrom(j["alloc"], scale, s, join(path, "alloc"), false);
  else if (scale) d.alloc.scale = allocFrom(json("optimal"), scale, s, join(path, "alloc"), false).scale;
  if (j.contains("block_size")) d.blockSize = asInt(j["block_size"], join(path, "block_size"));
  if (j.contains("pilot_fraction")) d.pilotFraction = asNumber(j["pilot_fraction"], join(path, "pilot_fraction"));
  if (j.contains("fallback")) d.fallback = allocFrom(j["fallback"], nullptr, s, join(path, "fallback"), false);
  if (j.contains("clip_eps")) d.clipEps = asNumber(j["clip_eps"], join(path, "clip_eps"));
  if (j.contains("arm")) d.arm = asInt(j["arm"], join(path, "arm"));

  if (d.blockSize < 2) invalid(join(path, "block_size"), "must be >= 2");
  if (!(d.pilotFraction > 0.0 && d.pilotFraction < 1.0)) invalid(join(path, "pilot_fraction"), "must lie in (0, 1)");
  if (!(d.clipEps > 0.0 && d.clipEps < 0.5)) invalid(join(path, "clip_eps"), "must lie in (0, 0.5)");
  if (d.arm < 0 || d.arm >= s.arms()) invalid(join(path, "arm"), "arm out of range");
  if ((d.kind == "matched_pairs" || d.kind == "two_stage") && s.arms() != 2)
    invalid(join(path, "kind"), d.kind + " requires exactly two arms");
  return d;
}

EstimatorSpec estimatorFrom(const json& j, const Scenario& s, const std::string& path) {
  requireObject(j, path, {"name", "kind", "alloc", "scale"});
  if (!j.contains("kind")) parseFail(path, "missing required key 'kind'");
  EstimatorSpec e;
  e.kind = asString(j["kind"], join(path, "kind"));
  if (!kEstimatorKinds.count(e.kind)) invalid(join(path, "kind"), "unknown estimator kind '" + e.kind + "'");
  e.name = j.contains("name") ? asString(j["name"], join(path, "name")) : e.kind;
  const json* scale = j.contains("scale") ? &j["scale"] : nullptr;
  if (j.contains("alloc")) e.alloc = allocFrom(j["alloc"], scale, s, join(path, "alloc"), true);
  if (e.kind == "diff_means" && !s.isAte()) invalid(join(path, "kind"), "diff_means requires the ATE functional");
  return e;
}

std::vector<GridEntry> gridFrom(const json& j, const std::string& path) {
  if (!j.is_array()) parseFail(path, "expected an array of {design, estimators}");
  std::vector<GridEntry> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = index(path, i);
    requireObject(j[i], p, {"design", "estimators"});
    if (!j[i].contains("design") || !j[i].contains("estimators")) parseFail(p, "needs 'design' and 'estimators'");
    out.push_back({asString(j[i]["design"], join(p, "design")), asStrings(j[i]["estimators"], join(p, "estimators"))});
  }
  return out;
}

template <class T>
void requireUniqueNames(const std::vector<T>& items, const std::string& path) {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < items.size(); ++i)
    if (!seen.insert(items[i].name).second) invalid(index(path, i) + ".name", "duplicate name '" + items[i].name + "'");
}

void checkGridRefs(const std::vector<GridEntry>& grid, const StudyConfig& cfg, const std::string& path) {
  auto hasDesign = [&](const std::string& n) {
    return std::any_of(cfg.designs.begin(), cfg.designs.end(), [&](const DesignSpec& d) { return d.name == n; });
  };
  auto hasEstimator = [&](const std::string& n) {
    return std::any_of(cfg.estimators.begin(), cfg.estimators.end(), [&](const EstimatorSpec& e) { return e.name == n; });
  };
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!hasDesign(grid[i].design)) invalid(index(path, i) + ".design", "no design named '" + grid[i].design + "'");
    for (std::size_t k = 0; k < grid[i].estimators.size(); ++k)
      if (!hasEstimator(grid[i].estimators[k]))
        invalid(index(index(path, i) + ".estimators", k), "no estimator named '" + grid[i].estimators[k] + "'");
  }
}

SolveStudy solveFrom(const json& j, const std::string& path) {
  requireObject(j, path, {"kkt_tol", "identity_tol", "derivative_tol"});
  SolveStudy s;
  if (j.contains("kkt_tol")) s.kktTol = asNumber(j["kkt_tol"], join(path, "kkt_tol"));
  if (j.contains("identity_tol")) s.identityTol = asNumber(j["identity_tol"], join(path, "identity_tol"));
  if (j.contains("derivative_tol")) s.derivativeTol = asNumber(j["derivative_tol"], join(path, "derivative_tol"));
  return s;
}

RiskStudy riskFrom(const json& j, const std::string& path) {
  requireObject(j, path, {"n", "reps", "theta", "grid", "floor_tol", "attain", "attain_tol"});
  RiskStudy r;
  if (j.contains("n")) r.n = asCount(j["n"], join(path, "n"));
  if (j.contains("reps")) r.reps = asCount(j["reps"], join(path, "reps"));
  if (j.contains("theta")) r.theta = asNumbers(j["theta"], join(path, "theta"));
  if (j.contains("grid")) r.grid = gridFrom(j["grid"], join(path, "grid"));
  if (j.contains("floor_tol")) r.floorTol = asNumber(j["floor_tol"], join(path, "floor_tol"));
  if (j.contains("attain")) r.attain = gridFrom(j["attain"], join(path, "attain"));
  if (j.contains("attain_tol")) r.attainTol = asNumber(j["attain_tol"], join(path, "attain_tol"));
  if (r.n < 1) invalid(join(path, "n"), "must be >= 1");
  if (r.reps < 2) invalid(join(path, "reps"), "must be >= 2");
  if (r.theta.empty()) invalid(join(path, "theta"), "must not be empty");
  return r;
}

LanStudy lanFrom(const json& j, const std::string& path) {
  requireObject(j, path, {"name", "h", "n", "reps", "augment", "i_star", "designs", "mean_se_tol", "var_tol", "ks_tol",
                          "require_decay", "moment_gates"});
  LanStudy l;
  if (j.contains("name")) l.name = asString(j["name"], join(path, "name"));
  if (j.contains("h")) l.h = asNumber(j["h"], join(path, "h"));
  if (j.contains("n")) {
    const json& nl = j["n"];
    const std::string p = join(path, "n");
    if (!nl.is_array()) parseFail(p, "expected an array of sample sizes");
    l.nList.clear();
    for (std::size_t i = 0; i < nl.size(); ++i) l.nList.push_back(asCount(nl[i], index(p, i)));
  }
  if (j.contains("reps")) l.reps = asCount(j["reps"], join(path, "reps"));
  if (j.contains("augment")) l.augment = asBool(j["augment"], join(path, "augment"));
  if (j.contains("i_star")) {
    const json& is = j["i_star"];
    if (is.is_string()) {
      if (is.get<std::string>() != "bound") invalid(join(path, "i_star"), "expected \"bound\" or a number");
    } else {
      l.iStarSource = "value";
      l.iStarValue = asNumber(is, join(path, "i_star"));
      if (!(l.iStarValue > 0.0)) invalid(join(path, "i_star"), "must be positive");
    }
  }
  if (j.contains("designs")) l.designs = asStrings(j["designs"], join(path, "designs"));
  if (j.contains("mean_se_tol")) l.meanSeTol = asNumber(j["mean_se_tol"], join(path, "mean_se_tol"));
  if (j.contains("var_tol")) l.varTol = asNumber(j["var_tol"], join(path, "var_tol"));
  if (j.contains("ks_tol")) l.ksTol = asNumber(j["ks_tol"], join(path, "ks_tol"));
  if (j.contains("require_decay")) l.requireDecay = asBool(j["require_decay"], join(path, "require_decay"));
  if (j.contains("moment_gates")) l.momentGates = asBool(j["moment_gates"], join(path, "moment_gates"));
  if (l.nList.empty()) invalid(join(path, "n"), "must not be empty");
  for (std::size_t i = 0; i < l.nList.size(); ++i) {
    if (l.nList[i] < 1) invalid(index(join(path, "n"), i), "must be >= 1");
    if (i > 0 && l.nList[i] <= l.nList[i - 1]) invalid(join(path, "n"), "sample sizes must be strictly ascending");
  }
  if (l.reps < 2) invalid(join(path, "reps"), "must be >= 2");
  return l;
}

}  // namespace

Scenario parseScenario(const std::string& text) { return scenarioFromJson(parseJson(text), ""); }

std::string serializeScenario(const Scenario& scenario) { return scenarioToJson(scenario).dump(2) + "\n"; }

StudyConfig parseConfig(const std::string& text) {
  const json j = parseJson(text);
  requireObject(j, "", {"scenario", "designs", "estimators", "study", "seed", "output"});
  if (!j.contains("scenario")) parseFail("", "missing required key 'scenario'");

  StudyConfig cfg;
  cfg.configHash = fnv1a64(text);
  cfg.scenario = scenarioFromJson(j["scenario"], "scenario");

  if (j.contains("designs")) {
    const json& d = j["designs"];
    if (!d.is_array()) parseFail("designs", "expected an array");
    for (std::size_t i = 0; i < d.size(); ++i) cfg.designs.push_back(designFrom(d[i], cfg.scenario, index("designs", i)));
  }
  if (j.contains("estimators")) {
    const json& e = j["estimators"];
    if (!e.is_array()) parseFail("estimators", "expected an array");
    for (std::size_t i = 0; i < e.size(); ++i)
      cfg.estimators.push_back(estimatorFrom(e[i], cfg.scenario, index("estimators", i)));
  }
  requireUniqueNames(cfg.designs, "designs");
  requireUniqueNames(cfg.estimators, "estimators");

  if (j.contains("study")) {
    const json& st = j["study"];
    requireObject(st, "study", {"solve", "risk", "lan"});
    if (st.contains("solve")) cfg.solve = solveFrom(st["solve"], "study.solve");
    if (st.contains("risk")) {
      cfg.risk = riskFrom(st["risk"], "study.risk");
      checkGridRefs(cfg.risk->grid, cfg, "study.risk.grid");
      checkGridRefs(cfg.risk->attain, cfg, "study.risk.attain");
    }
    if (st.contains("lan")) {
      const json& l = st["lan"];
      if (l.is_array()) {
        for (std::size_t i = 0; i < l.size(); ++i) cfg.lan.push_back(lanFrom(l[i], index("study.lan", i)));
      } else {
        cfg.lan.push_back(lanFrom(l, "study.lan"));
      }
      std::set<std::string> labels;
      for (std::size_t k = 0; k < cfg.lan.size(); ++k) {
        if (!labels.insert(cfg.lan[k].name).second) invalid(index("study.lan", k) + ".name", "duplicate section name");
        for (std::size_t i = 0; i < cfg.lan[k].designs.size(); ++i) {
          const auto& n = cfg.lan[k].designs[i];
          if (std::none_of(cfg.designs.begin(), cfg.designs.end(), [&](const DesignSpec& d) { return d.name == n; }))
            invalid(index(index("study.lan", k) + ".designs", i), "no design named '" + n + "'");
        }
      }
    }
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) parseFail("seed", "expected a non-negative integer");
    cfg.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("output")) cfg.output = asString(j["output"], "output");
  return cfg;
}

}  // namespace effbound
