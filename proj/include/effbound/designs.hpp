#pragma once

// Sequential assignment rules W_i = w_i(X^(n), Y^(i-1), U). A rule sees the
// whole covariate sample, the outcomes and assignments of earlier units, and
// a stream of uniforms; it never sees outcomes of the current or later units.
//
// Uniform consumption order (part of the reproducibility contract):
//   IidPropensity            one variate per unit
//   StratifiedBlocks         one variate per block for systematic rounding of
//                            the arm counts, then B-1 for the Fisher-Yates
//                            shuffle, drawn when the block's first unit arrives
//   MatchedPairs             one variate for the first unit of each pair and
//                            for an odd leftover unit; none for the second
//   TwoStageAdaptive         one variate per unit
//   DeterministicAlternation none
//   FullTreatment            none

#include <effbound/rng.hpp>
#include <effbound/scenario.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace effbound {

struct IidPropensity {
  Table alloc;
};

struct StratifiedBlocks {
  Table alloc;
  int blockSize = 4;
};

// Binary only; pairs formed within exact strata by arrival order.
struct MatchedPairs {};

// Binary only. Units [0, nPilot) follow fallback; later units follow the
// Neyman propensity estimated from pilot stratum sample variances.
struct TwoStageAdaptive {
  double pilotFraction = 0.1;
  Table fallback;
  double clipEps = kDefaultClipEps;
};

// W_i = i mod #arms
struct DeterministicAlternation {};

struct FullTreatment {
  Arm arm = 1;
};

using DesignKind = std::variant<IidPropensity, StratifiedBlocks, MatchedPairs, TwoStageAdaptive,
                                DeterministicAlternation, FullTreatment>;

struct DesignRule {
  std::string name;
  DesignKind kind;
};

std::string kindName(const DesignKind& kind);

// Throws RuleScenarioMismatch when the rule cannot run on the scenario.
void checkRule(const DesignRule& rule, const Scenario& scenario);

struct AssignmentContext {
  std::span<const int> xAll;
  std::span<const double> yPast;  // length i
  std::span<const Arm> wPast;     // length i
  std::size_t i = 0;
  UniformSource& u;
};

// Holds the per-experiment state of a rule (open blocks, pair partners, the
// post-pilot propensity). Calls must be made for i = 0, 1, ... in order.
class Assigner {
 public:
  Assigner(DesignRule rule, int strata, int arms, std::span<const int> xAll);

  Arm assign(const AssignmentContext& ctx);

  // Post-pilot propensity table once computed (TwoStageAdaptive only).
  const Table& adaptedAllocation() const { return adapted_; }
  std::size_t pilotSize() const { return pilotSize_; }

 private:
  Arm drawFrom(const Table& alloc, int x, double u) const;
  Arm nextInBlock(int x, UniformSource& u);
  Arm nextInPair(int x, UniformSource& u);
  void adaptFromPilot(const AssignmentContext& ctx);

  DesignRule rule_;
  int strata_;
  int arms_;
  std::size_t n_;

  std::vector<std::vector<Arm>> blocks_;
  std::vector<std::size_t> blockPos_;

  std::vector<std::size_t> stratumTotal_;
  std::vector<std::size_t> stratumSeen_;
  std::vector<Arm> pairFirst_;

  std::size_t pilotSize_ = 0;
  bool adapted_ready_ = false;
  Table adapted_;
};

struct ExperimentLog {
  std::size_t n = 0;
  std::vector<int> x;
  std::vector<Arm> w;
  std::vector<double> y;  // 0 where w == kUnassigned
  double theta = 0.0;
  std::uint64_t seed = 0;
  std::string rule;
};

struct RealizedShares {
  Table share;                  // per stratum, fraction of units assigned to each arm
  std::vector<std::size_t> counts;  // units per stratum
  std::vector<double> usage;    // (1/m) sum_i r_k(X_i, W_i) per budget row
};

// Shares over units [from, n).
RealizedShares realizedShares(const ExperimentLog& log, const Scenario& scenario, std::size_t from = 0);

}  // namespace effbound
