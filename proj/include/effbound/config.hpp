#pragma once

// JSON study configuration: scenario block, design and estimator lists, the
// study sections and run settings. Keys are strict; unknown keys are errors.

#include <effbound/scenario.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace effbound {

// Reference to an allocation table. Tokens: "neyman", "optimal" (alias
// "constrained"), "uniform", "design" (estimators only: the propensity the
// design actually uses) or an explicit K x W table. scale multiplies it.
struct AllocRef {
  std::string token = "optimal";
  std::optional<Table> table;
  double scale = 1.0;
};

struct DesignSpec {
  std::string name;
  std::string kind;  // iid, stratified_blocks, matched_pairs, two_stage, alternation, full
  AllocRef alloc;
  int blockSize = 4;
  double pilotFraction = 0.1;
  AllocRef fallback{"uniform", std::nullopt, 1.0};
  double clipEps = kDefaultClipEps;
  int arm = 1;
};

struct EstimatorSpec {
  std::string name;
  std::string kind;  // diff_means, ipw_ht, ipw_hajek, aipw_oracle, aipw_plugin, stratified_means
  AllocRef alloc{"design", std::nullopt, 1.0};
};

struct SolveStudy {
  double kktTol = 1e-8;
  double identityTol = 1e-8;
  double derivativeTol = 1e-6;
};

struct GridEntry {
  std::string design;
  std::vector<std::string> estimators;
};

struct RiskStudy {
  std::size_t n = 2000;
  std::size_t reps = 10000;
  std::vector<double> theta{0.0};
  std::vector<GridEntry> grid;  // empty: every design with every estimator
  double floorTol = 0.05;
  std::vector<GridEntry> attain;  // pairs whose nVar must lie within attainTol of the bound
  double attainTol = 0.05;
};

struct LanStudy {
  std::string name = "lan";
  double h = 1.0;
  std::vector<std::size_t> nList{400, 1600, 6400};
  std::size_t reps = 2000;
  bool augment = false;
  std::string iStarSource = "bound";  // "bound" or "value"
  double iStarValue = 0.0;
  std::vector<std::string> designs;  // empty: all designs
  double meanSeTol = 3.0;
  double varTol = 0.08;
  double ksTol = 0.05;
  bool requireDecay = true;
  bool momentGates = true;
};

struct StudyConfig {
  Scenario scenario;
  std::vector<DesignSpec> designs;
  std::vector<EstimatorSpec> estimators;
  std::optional<SolveStudy> solve;
  std::optional<RiskStudy> risk;
  std::vector<LanStudy> lan;  // study.lan may be one section or a list
  std::uint64_t seed = 1;
  std::string output = "out";
  std::uint64_t configHash = 0;  // FNV-1a of the source text
};

// Throws ParseError for malformed JSON, wrong types or unknown keys (with a
// suggestion), ValidationError for semantic problems. Messages name the
// offending field path.
StudyConfig parseConfig(const std::string& text);

Scenario parseScenario(const std::string& text);
std::string serializeScenario(const Scenario& scenario);

}  // namespace effbound
