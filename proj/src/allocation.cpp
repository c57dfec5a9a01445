#include <effbound/allocation.hpp>
#include <effbound/error.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace effbound {

namespace {

double weightedVariance(const Scenario& s, const Vector& values) {
  double mean = 0.0;
  for (int x = 0; x < s.strata(); ++x) mean += s.prob(x) * values(x);
  double var = 0.0;
  for (int x = 0; x < s.strata(); ++x) {
    const double d = values(x) - mean;
    var += s.prob(x) * d * d;
  }
  return var;
}

void requireBinary(const Scenario& s, const char* what) {
  if (s.arms() != 2) throw Error(ErrorCode::InvalidArgument, std::string(what) + " requires two arms");
}

}  // namespace

AllocationMap propensityMap(const Vector& e, std::string solver) {
  AllocationMap out;
  out.p.resize(e.size(), 2);
  out.p.col(1) = e;
  out.p.col(0) = 1.0 - e;
  out.meta.solver = std::move(solver);
  return out;
}

BoundValue evalBoundBinary(const Scenario& s, const Vector& e) {
  requireBinary(s, "evalBoundBinary");
  if (e.size() != s.strata()) throw Error(ErrorCode::InvalidArgument, "propensity length differs from support size");

  const auto& mu = s.outcomes.mu;
  const auto& s2 = s.outcomes.sigma2;
  BoundValue out;
  out.perArm = Vector::Zero(2);
  for (int x = 0; x < s.strata(); ++x) {
    const double ex = e(x);
    const bool bad = !(ex >= 0.0 && ex <= 1.0) || (s2(x, 1) > 0.0 && ex == 0.0) ||
                     (s2(x, 0) > 0.0 && ex == 1.0);
    if (bad) {
      std::ostringstream os;
      os << "e(" << x << ") = " << ex;
      throw Error(ErrorCode::PropensityOutOfRange, os.str());
    }
    if (s2(x, 0) > 0.0) out.perArm(0) += s.prob(x) * s2(x, 0) / (1.0 - ex);
    if (s2(x, 1) > 0.0) out.perArm(1) += s.prob(x) * s2(x, 1) / ex;
  }
  out.varOfCate = weightedVariance(s, (mu.col(1) - mu.col(0)).eval());
  out.v = out.varOfCate + out.perArm.sum();
  return out;
}

AllocationMap neymanAllocation(const Scenario& s, double clipEps) {
  requireBinary(s, "neymanAllocation");
  const Table var = s.transformedVariance();
  const int K = s.strata();
  Vector e(K);
  Vector lambda(K);
  bool certified = true;
  std::vector<std::string> warnings;

  for (int x = 0; x < K; ++x) {
    const double sd0 = std::sqrt(var(x, 0));
    const double sd1 = std::sqrt(var(x, 1));
    if (sd0 + sd1 == 0.0) {
      e(x) = 0.5;
      certified = false;
      warnings.push_back("BothArmsDegenerate at x=" + std::to_string(x) + "; e*=1/2");
      continue;
    }
    // sigma0^2/(1-e)^2 = sigma1^2/e^2 with e in (0,1)
    e(x) = sd1 / (sd0 + sd1);
    lambda(x) = (sd0 + sd1) * (sd0 + sd1);
    if (sd0 == 0.0 || sd1 == 0.0) {
      e(x) = std::clamp(e(x), clipEps, 1.0 - clipEps);
      certified = false;
      warnings.push_back("degenerate arm at x=" + std::to_string(x) + "; clipped to " +
                         std::to_string(e(x)));
    }
  }

  AllocationMap out = propensityMap(e, "neyman");
  out.meta.warnings = std::move(warnings);
  if (certified) out.duals = DualCertificate{lambda, {}};
  return out;
}

BoundValue evalBoundGeneral(const Scenario& s, const Table& p) {
  const int K = s.strata();
  const int W = s.arms();
  if (p.rows() != K || p.cols() != W) throw Error(ErrorCode::InvalidArgument, "allocation shape does not match scenario");

  const Table muT = s.transformedMean();
  const Table varT = s.transformedVariance();
  BoundValue out;
  out.perArm = Vector::Zero(W);
  for (int x = 0; x < K; ++x)
    for (int w = 0; w < W; ++w) {
      if (varT(x, w) == 0.0) continue;
      if (!(p(x, w) > 0.0)) {
        std::ostringstream os;
        os << "p(" << x << "," << w << ") = " << p(x, w) << " with positive variance";
        throw Error(ErrorCode::DivisionByZeroPropensity, os.str());
      }
      out.perArm(w) += s.prob(x) * varT(x, w) / p(x, w);
    }
  out.varOfCate = weightedVariance(s, muT.rowwise().sum().eval());
  out.v = out.varOfCate + out.perArm.sum();
  return out;
}

std::vector<double> constraintUsage(const Scenario& s, const Table& p) {
  std::vector<double> usage;
  if (!s.constraint) return usage;
  for (const auto& r : s.constraint->r) {
    double u = 0.0;
    for (int x = 0; x < s.strata(); ++x) u += s.prob(x) * (r.row(x) * p.row(x)).sum();
    usage.push_back(u);
  }
  return usage;
}

namespace {

// Dual bisection for
//   min sum_w E[sigma~^2/p]  s.t.  sum_w p(x,w) <= 1,  sum_w E[r_k p] <= c_k.
class ConstrainedSolver {
 public:
  ConstrainedSolver(const Scenario& s, const SolverOptions& opt) : s_(s), opt_(opt) {
    K_ = s.strata();
    W_ = s.arms();
    sd_ = s.transformedVariance().sqrt();
    if (s.constraint) {
      r_ = s.constraint->r;
      c_ = s.constraint->c;
    }
    for (std::size_t k = 0; k < r_.size(); ++k) {
      if ((r_[k] < 0.0).any()) throw Error(ErrorCode::InvalidArgument, "constraint loadings must be nonnegative");
      if (c_[k] < 0.0) throw Error(ErrorCode::InvalidArgument, "constraint budgets must be nonnegative");
    }
    if (r_.size() > 2) throw Error(ErrorCode::InvalidArgument, "at most two budget rows are supported");
    p_ = Table::Zero(K_, W_);
    lambda_ = Vector::Zero(K_);
  }

  AllocationMap solve() {
    std::vector<double> mu(r_.size(), 0.0);
    int iterations = 0;

    if (r_.size() == 1) {
      iterations = solveCoordinate(mu, 0);
    } else if (r_.size() == 2) {
      bool done = false;
      for (int cycle = 1; cycle <= opt_.maxIterations; ++cycle) {
        solveCoordinate(mu, 0);
        solveCoordinate(mu, 1);
        iterations = cycle;
        if (jointResidual(mu) < opt_.budgetTol) {
          done = true;
          break;
        }
      }
      if (!done) throw Error(ErrorCode::SolverDiverged, "coordinate bisection exceeded the iteration cap");
    }
    inner(mu);

    AllocationMap out;
    out.p = p_;
    out.duals = DualCertificate{lambda_, mu};
    out.meta.solver = "constrained";
    out.meta.iterations = iterations;
    return out;
  }

 private:
  double weight(int x, int w, const std::vector<double>& mu) const {
    double v = 0.0;
    for (std::size_t k = 0; k < mu.size(); ++k) v += mu[k] * r_[k](x, w);
    return v;
  }

  // For fixed mu, solve each covariate value: p = sd / sqrt(lambda + mu'r),
  // lambda >= 0 chosen so that sum_w p <= 1 with complementary slackness.
  void inner(const std::vector<double>& mu) {
    for (int x = 0; x < K_; ++x) {
      double totalSd = 0.0;
      bool needsLambda = false;
      double freeSum = 0.0;
      for (int w = 0; w < W_; ++w) {
        if (sd_(x, w) == 0.0) continue;
        totalSd += sd_(x, w);
        const double rho = weight(x, w, mu);
        if (rho <= 0.0) needsLambda = true;
        else freeSum += sd_(x, w) / std::sqrt(rho);
      }
      double lam = 0.0;
      if (totalSd > 0.0 && (needsLambda || freeSum > 1.0)) {
        auto sum = [&](double l) {
          double acc = 0.0;
          for (int w = 0; w < W_; ++w)
            if (sd_(x, w) > 0.0) acc += sd_(x, w) / std::sqrt(l + weight(x, w, mu));
          return acc;
        };
        double lo = 0.0, hi = totalSd * totalSd;
        for (int it = 0; it < 400; ++it) {
          const double mid = 0.5 * (lo + hi);
          if (mid <= lo || mid >= hi) break;
          if (sum(mid) > 1.0) lo = mid;
          else hi = mid;
        }
        lam = hi;
      }
      lambda_(x) = lam;
      for (int w = 0; w < W_; ++w)
        p_(x, w) = sd_(x, w) == 0.0 ? 0.0 : sd_(x, w) / std::sqrt(lam + weight(x, w, mu));
    }
  }

  double budgetGap(int k) const {
    double u = 0.0;
    for (int x = 0; x < K_; ++x) u += s_.prob(x) * (r_[k].row(x) * p_.row(x)).sum();
    return u - c_[k];
  }

  double jointResidual(std::vector<double>& mu) {
    inner(mu);
    double res = 0.0;
    for (std::size_t k = 0; k < mu.size(); ++k) {
      const double g = budgetGap(static_cast<int>(k));
      res = std::max(res, mu[k] > 0.0 ? std::abs(g) : std::max(g, 0.0));
    }
    return res;
  }

  // Bisection on mu_k >= 0 against the (nonincreasing) budget gap; returns steps.
  int solveCoordinate(std::vector<double>& mu, int k) {
    auto gap = [&](double value) {
      mu[k] = value;
      inner(mu);
      return budgetGap(k);
    };
    int steps = 1;
    if (gap(0.0) <= 0.0) return steps;

    double lo = 0.0, hi = std::max(1.0, 2.0 * mu[k]);
    while (gap(hi) > 0.0) {
      ++steps;
      lo = hi;
      hi *= 2.0;
      if (hi > opt_.dualBracketCap) {
        std::ostringstream os;
        os << "budget row " << k << " cannot be met for any finite multiplier (c = " << c_[k] << ")";
        throw Error(ErrorCode::UnboundedDual, os.str());
      }
    }
    for (int it = 0; it < 400; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      ++steps;
      if (gap(mid) > 0.0) lo = mid;
      else hi = mid;
    }
    mu[k] = hi;
    return steps;
  }

  const Scenario& s_;
  SolverOptions opt_;
  int K_ = 0;
  int W_ = 0;
  Table sd_;
  std::vector<Table> r_;
  std::vector<double> c_;
  Table p_;
  Vector lambda_;
};

}  // namespace

AllocationMap solveConstrained(const Scenario& scenario, const SolverOptions& options) {
  return ConstrainedSolver(scenario, options).solve();
}

double KktResidual::max() const { return std::max({stationarity, primal, dual, slackness}); }

KktResidual kktResidual(const Scenario& s, const AllocationMap& alloc) {
  if (!alloc.duals) throw Error(ErrorCode::InvalidArgument, "allocation carries no dual certificate");
  const auto& lambda = alloc.duals->lambda;
  const auto& mu = alloc.duals->mu;
  const Table varT = s.transformedVariance();
  const Table& p = alloc.p;
  const int K = s.strata();
  const int W = s.arms();
  const int rows = s.constraint ? s.constraint->rows() : 0;
  if (static_cast<int>(mu.size()) != rows) throw Error(ErrorCode::InvalidArgument, "dual length differs from budget rows");

  KktResidual res;
  for (int x = 0; x < K; ++x) {
    double sum = 0.0;
    for (int w = 0; w < W; ++w) {
      sum += p(x, w);
      res.primal = std::max(res.primal, -p(x, w));
      if (varT(x, w) == 0.0) continue;
      double target = lambda(x);
      for (int k = 0; k < rows; ++k) target += mu[static_cast<std::size_t>(k)] * s.constraint->r[static_cast<std::size_t>(k)](x, w);
      const double lhs = p(x, w) > 0.0 ? varT(x, w) / (p(x, w) * p(x, w)) : std::numeric_limits<double>::infinity();
      res.stationarity = std::max(res.stationarity, std::abs(lhs - target) / std::max(1.0, target));
    }
    res.primal = std::max(res.primal, sum - 1.0);
    res.dual = std::max(res.dual, -lambda(x));
    res.slackness = std::max(res.slackness, std::abs(lambda(x) * (sum - 1.0)));
  }
  const auto usage = constraintUsage(s, p);
  for (int k = 0; k < rows; ++k) {
    const double g = usage[static_cast<std::size_t>(k)] - s.constraint->c[static_cast<std::size_t>(k)];
    res.primal = std::max(res.primal, g);
    res.dual = std::max(res.dual, -mu[static_cast<std::size_t>(k)]);
    res.slackness = std::max(res.slackness, std::abs(mu[static_cast<std::size_t>(k)] * g));
  }
  return res;
}

double boundFromDuals(const Scenario& s, const AllocationMap& alloc) {
  if (!alloc.duals) throw Error(ErrorCode::InvalidArgument, "allocation carries no dual certificate");
  const Table muT = s.transformedMean();
  double v = weightedVariance(s, muT.rowwise().sum().eval());
  for (int x = 0; x < s.strata(); ++x) v += s.prob(x) * alloc.duals->lambda(x);
  for (std::size_t k = 0; k < alloc.duals->mu.size(); ++k) v += alloc.duals->mu[k] * s.constraint->c[k];
  return v;
}

AllocationMap optimalAllocation(const Scenario& s) {
  if (s.constraint && s.constraint->rows() > 0) return solveConstrained(s);
  if (s.isAte()) return neymanAllocation(s);
  return solveConstrained(s);
}

}  // namespace effbound
