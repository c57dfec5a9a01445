#pragma once

#include <effbound/designs.hpp>
#include <effbound/engine.hpp>
#include <effbound/scenario.hpp>

#include <span>
#include <string>
#include <variant>
#include <vector>

namespace effbound {

// Difference of arm means; binary ATE only.
struct DiffMeans {};
// (1/n) sum_i sum_w 1{W_i=w} Y~_i / p(X_i,w)
struct IpwHT {
  Table alloc;
};
// Per-arm normalized inverse-propensity means.
struct IpwHajek {
  Table alloc;
};
// Sample analogue of the efficient influence function with the true
// conditional means of the base scenario.
struct AipwOracle {
  Table alloc;
};
// As AipwOracle with leave-one-out stratum-arm sample means.
struct AipwPlugin {
  Table alloc;
};
// sum_x (n_x/n) sum_w mean of Y~ in cell (x,w)
struct StratifiedMeans {};

using EstimatorKind = std::variant<DiffMeans, IpwHT, IpwHajek, AipwOracle, AipwPlugin, StratifiedMeans>;

struct Estimator {
  std::string name;
  EstimatorKind kind;
};

std::string kindName(const EstimatorKind& kind);

struct EstimateFlags {
  bool emptyCell = false;  // a stratum-arm cell had no observation
  bool smallCell = false;  // a cell had a single observation, so no leave-one-out mean
};

// Estimate of tau from one log. Propensity-weighted kinds require
// p(x,w) >= clipEps on every observed (x,w).
double estimate(const Estimator& est, const Scenario& scenario, const ExperimentLog& log,
                EstimateFlags* flags = nullptr, double clipEps = kDefaultClipEps);

struct RiskReport {
  std::size_t reps = 0;
  std::size_t n = 0;
  double theta = 0.0;
  double truth = 0.0;
  double mean = 0.0;
  double bias = 0.0;
  double varianceTimesN = 0.0;  // n times the plug-in variance over replications
  double mseTimesN = 0.0;
  double mcStdError = 0.0;      // of varianceTimesN
  double maeTimesSqrtN = 0.0;   // E|sqrt(n)(estimate - truth)|
};

RiskReport summarizeRisk(std::span<const double> estimates, double truth, std::size_t n, double theta);

RiskReport riskOverReps(const Estimator& est, const Submodel& sub, double theta, const DesignRule& rule, std::size_t n,
                        std::size_t reps, std::uint64_t seedBase, RunOptions options = {});

// Evaluates several estimators on the same replication logs.
std::vector<RiskReport> riskOverReps(std::span<const Estimator> ests, const Submodel& sub, double theta,
                                     const DesignRule& rule, std::size_t n, std::size_t reps, std::uint64_t seedBase,
                                     RunOptions options = {});

}  // namespace effbound
