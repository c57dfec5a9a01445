#pragma once

// Variance bounds and optimal allocations: the binary (ATE) bound, the
// closed-form Neyman propensity, the general multi-arm bound, and a
// dual-bisection solver for the constrained allocation problem that returns
// its Lagrange multipliers as an optimality certificate.

#include <effbound/scenario.hpp>

#include <optional>
#include <string>
#include <vector>

namespace effbound {

struct DualCertificate {
  Vector lambda;           // per covariate value, multiplier of sum_w p(x,w) <= 1
  std::vector<double> mu;  // per budget row
};

struct AllocationMeta {
  std::string solver;
  int iterations = 0;
  std::vector<std::string> warnings;
};

struct AllocationMap {
  Table p;
  std::optional<DualCertificate> duals;
  AllocationMeta meta;

  int strata() const { return static_cast<int>(p.rows()); }
  int arms() const { return static_cast<int>(p.cols()); }
};

// Binary map with p(x,1) = e(x), p(x,0) = 1 - e(x).
AllocationMap propensityMap(const Vector& e, std::string solver = "explicit");

struct BoundValue {
  double v = 0.0;
  double varOfCate = 0.0;
  Vector perArm;  // E[sigma~^2(X,w) / p(X,w)] per arm
};

BoundValue evalBoundBinary(const Scenario& scenario, const Vector& e);

AllocationMap neymanAllocation(const Scenario& scenario, double clipEps = kDefaultClipEps);

BoundValue evalBoundGeneral(const Scenario& scenario, const Table& p);
inline BoundValue evalBoundGeneral(const Scenario& scenario, const AllocationMap& alloc) {
  return evalBoundGeneral(scenario, alloc.p);
}

// Both bisections run to machine precision; budgetTol gates the coupled
// two-row loop.
struct SolverOptions {
  double budgetTol = 1e-10;     // joint residual for the outer loop
  int maxIterations = 100000;   // outer cycles
  double dualBracketCap = 1e12;
};

AllocationMap solveConstrained(const Scenario& scenario, const SolverOptions& options = {});

// Components of the KKT residual; stationarity is measured relative to
// max(1, lambda(x) + mu'r(x,w)).
struct KktResidual {
  double stationarity = 0.0;
  double primal = 0.0;
  double dual = 0.0;
  double slackness = 0.0;

  double max() const;
};

KktResidual kktResidual(const Scenario& scenario, const AllocationMap& alloc);

// var(sum_w mu~) + E lambda(X) + mu'c, from the attached duals.
double boundFromDuals(const Scenario& scenario, const AllocationMap& alloc);

// sum_w E[r_k(X,w) p(X,w)] for every budget row.
std::vector<double> constraintUsage(const Scenario& scenario, const Table& p);

// The allocation against which efficiency is judged: the constrained optimum
// if the scenario carries a constraint, otherwise Neyman for the ATE and the
// sum-constrained optimum for general functionals.
AllocationMap optimalAllocation(const Scenario& scenario);

}  // namespace effbound
