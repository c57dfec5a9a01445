#include <effbound/allocation.hpp>
#include <effbound/error.hpp>
#include <effbound/scenario.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace effbound {

double Scenario::loading(int x, int w) const {
  if (const auto* g = std::get_if<GeneralTau>(&functional)) return g->a(x, w);
  return w == 1 ? 1.0 : -1.0;
}

double Scenario::offset(int x, int w) const {
  if (const auto* g = std::get_if<GeneralTau>(&functional)) return g->b(x, w);
  return 0.0;
}

Table Scenario::transformedMean() const {
  Table out(strata(), arms());
  for (int x = 0; x < strata(); ++x)
    for (int w = 0; w < arms(); ++w) out(x, w) = loading(x, w) * outcomes.mu(x, w) + offset(x, w);
  return out;
}

Table Scenario::transformedVariance() const {
  Table out(strata(), arms());
  for (int x = 0; x < strata(); ++x)
    for (int w = 0; w < arms(); ++w) {
      const double a = loading(x, w);
      out(x, w) = a * a * outcomes.sigma2(x, w);
    }
  return out;
}

std::string ValidationReport::summary() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < issues.size(); ++i) {
    if (i) os << "; ";
    os << issues[i].field << ": " << issues[i].message;
  }
  return os.str();
}

namespace {

void checkShape(ValidationReport& report, const std::string& field, const Table& t, int rows,
                int cols) {
  if (t.rows() != rows || t.cols() != cols) {
    std::ostringstream os;
    os << "expected " << rows << "x" << cols << " table, got " << t.rows() << "x" << t.cols();
    report.issues.push_back({field, os.str()});
  }
}

void checkFinite(ValidationReport& report, const std::string& field, const Table& t) {
  for (Eigen::Index i = 0; i < t.rows(); ++i)
    for (Eigen::Index j = 0; j < t.cols(); ++j)
      if (!std::isfinite(t(i, j))) {
        std::ostringstream os;
        os << "non-finite entry at [" << i << "][" << j << "]";
        report.issues.push_back({field, os.str()});
        return;
      }
}

}  // namespace

ValidationReport validate(const Scenario& s) {
  ValidationReport report;
  const auto& cov = s.covariates;
  const int K = cov.size();

  if (K == 0) report.issues.push_back({"covariates.probs", "empty covariate support"});
  if (static_cast<int>(cov.support.size()) != K)
    report.issues.push_back({"covariates.support", "support and probs lengths differ"});

  double total = 0.0;
  for (int x = 0; x < K; ++x) {
    const double q = cov.probs[static_cast<std::size_t>(x)];
    total += q;
    if (!(q > 0.0) || !std::isfinite(q)) {
      std::ostringstream os;
      os << "probability at index " << x << " must be positive";
      report.issues.push_back({"covariates.probs", os.str()});
    }
  }
  if (K > 0 && std::abs(total - 1.0) > 1e-12) {
    std::ostringstream os;
    os.precision(17);
    os << "probs sum != 1 (sum = " << total << ")";
    report.issues.push_back({"covariates.probs", os.str()});
  }
  std::set<std::string> labels(cov.support.begin(), cov.support.end());
  if (labels.size() != cov.support.size())
    report.issues.push_back({"covariates.support", "support labels are not distinct"});

  const int W = s.outcomes.arms;
  if (W < 1) report.issues.push_back({"arms", "at least one arm is required"});
  checkShape(report, "mu", s.outcomes.mu, K, W);
  checkShape(report, "sigma2", s.outcomes.sigma2, K, W);
  checkFinite(report, "mu", s.outcomes.mu);
  checkFinite(report, "sigma2", s.outcomes.sigma2);
  for (Eigen::Index x = 0; x < s.outcomes.sigma2.rows(); ++x)
    for (Eigen::Index w = 0; w < s.outcomes.sigma2.cols(); ++w)
      if (s.outcomes.sigma2(x, w) < 0.0) {
        std::ostringstream os;
        os << "negative variance at [" << x << "][" << w << "]";
        report.issues.push_back({"sigma2", os.str()});
      }

  if (s.isAte()) {
    if (W != 2) report.issues.push_back({"functional", "ATE functional requires exactly 2 arms"});
  } else {
    const auto& g = std::get<GeneralTau>(s.functional);
    checkShape(report, "functional.a", g.a, K, W);
    checkShape(report, "functional.b", g.b, K, W);
    checkFinite(report, "functional.a", g.a);
    checkFinite(report, "functional.b", g.b);
  }

  if (s.constraint) {
    const auto& cs = *s.constraint;
    if (cs.rows() > 2) report.issues.push_back({"constraint.c", "at most 2 budget rows supported"});
    if (static_cast<int>(cs.r.size()) != cs.rows())
      report.issues.push_back({"constraint.r", "number of loading tables differs from length of c"});
    for (std::size_t k = 0; k < cs.r.size(); ++k) {
      const std::string field = "constraint.r[" + std::to_string(k) + "]";
      checkShape(report, field, cs.r[k], K, W);
      checkFinite(report, field, cs.r[k]);
    }
    for (std::size_t k = 0; k < cs.c.size(); ++k)
      if (!std::isfinite(cs.c[k]))
        report.issues.push_back({"constraint.c", "non-finite budget at index " + std::to_string(k)});
  }
  return report;
}

void requireValid(const Scenario& scenario) {
  auto report = validate(scenario);
  if (!report.ok()) throw Error(ErrorCode::ValidationError, report.summary());
}

Submodel::Submodel(Scenario base, Vector scoreX, Table meanShift, double clipEps)
    : base_(std::move(base)),
      scoreX_(std::move(scoreX)),
      meanShift_(std::move(meanShift)),
      clipEps_(clipEps) {
  const int K = base_.strata();
  if (scoreX_.size() != K) throw Error(ErrorCode::InvalidArgument, "score length differs from support size");
  if (meanShift_.rows() != K || meanShift_.cols() != base_.arms())
    throw Error(ErrorCode::InvalidArgument, "mean-shift table has wrong shape");
  double mean = 0.0, scale = 1.0;
  for (int x = 0; x < K; ++x) {
    mean += base_.prob(x) * scoreX_(x);
    scale = std::max(scale, std::abs(scoreX_(x)));
  }
  if (std::abs(mean) > 1e-12 * scale)
    throw Error(ErrorCode::InvalidArgument, "covariate score is not mean-zero under the base law");
}

double Submodel::logPartition(double theta) const {
  if (theta == 0.0) return 0.0;
  // log sum_x probs(x) exp(theta sX(x)), shifted for stability
  const double top = (theta * scoreX_).maxCoeff();
  double acc = 0.0;
  for (int x = 0; x < base_.strata(); ++x) acc += base_.prob(x) * std::exp(theta * scoreX_(x) - top);
  return top + std::log(acc);
}

Vector Submodel::covariateProbs(double theta) const {
  const double logZ = logPartition(theta);
  Vector q(base_.strata());
  for (int x = 0; x < base_.strata(); ++x) q(x) = base_.prob(x) * std::exp(theta * scoreX_(x) - logZ);
  return q;
}

double Submodel::scoreY(int x, int w, double y) const {
  const double s2 = base_.outcomes.sigma2(x, w);
  if (s2 == 0.0) return 0.0;
  return meanShift_(x, w) * (y - base_.outcomes.mu(x, w)) / s2;
}

double Submodel::conditionalInfo(int x, int w) const {
  const double s2 = base_.outcomes.sigma2(x, w);
  if (s2 == 0.0) return 0.0;
  const double c = meanShift_(x, w);
  return c * c / s2;
}

double Submodel::logRatioY(int x, int w, double y, double theta) const {
  const double s2 = base_.outcomes.sigma2(x, w);
  if (s2 == 0.0) return 0.0;
  const double r0 = y - base_.outcomes.mu(x, w);
  const double r1 = r0 - theta * meanShift_(x, w);
  return (r0 * r0 - r1 * r1) / (2.0 * s2);
}

Submodel leastFavorableSubmodel(const Scenario& scenario, const AllocationMap& alloc) {
  return leastFavorableSubmodel(scenario, alloc.p);
}

Submodel leastFavorableSubmodel(const Scenario& scenario, const Table& p) {
  const int K = scenario.strata();
  const int W = scenario.arms();
  if (p.rows() != K || p.cols() != W)
    throw Error(ErrorCode::InvalidArgument, "allocation shape does not match scenario");

  const Table muT = scenario.transformedMean();
  const Table varT = scenario.transformedVariance();

  Vector total = muT.rowwise().sum();
  double mean = 0.0;
  for (int x = 0; x < K; ++x) mean += scenario.prob(x) * total(x);
  Vector sX = total - mean;

  // s_w = (y~ - mu~)/p = a (y - mu)/p, matched by a Gaussian shift c = a sigma2 / p.
  Table c = Table::Zero(K, W);
  for (int x = 0; x < K; ++x)
    for (int w = 0; w < W; ++w) {
      if (varT(x, w) == 0.0) continue;
      if (!(p(x, w) > 0.0)) {
        std::ostringstream os;
        os << "p(" << x << "," << w << ") = 0 on an arm with positive variance";
        throw Error(ErrorCode::DivisionByZeroPropensity, os.str());
      }
      c(x, w) = scenario.loading(x, w) * scenario.outcomes.sigma2(x, w) / p(x, w);
    }
  return Submodel(scenario, std::move(sX), std::move(c));
}

Informations informations(const Submodel& sub) {
  const auto& s = sub.base();
  Informations out;
  out.conditional = Table::Zero(s.strata(), s.arms());
  for (int x = 0; x < s.strata(); ++x) {
    out.covariate += s.prob(x) * sub.scoreX()(x) * sub.scoreX()(x);
    for (int w = 0; w < s.arms(); ++w) out.conditional(x, w) = sub.conditionalInfo(x, w);
  }
  return out;
}

double tauAt(const Submodel& sub, double theta) {
  const auto& s = sub.base();
  const Vector q = sub.covariateProbs(theta);
  double tau = 0.0;
  for (int x = 0; x < s.strata(); ++x) {
    double inner = 0.0;
    for (int w = 0; w < s.arms(); ++w)
      inner += s.loading(x, w) * sub.outcomeMean(x, w, theta) + s.offset(x, w);
    tau += q(x) * inner;
  }
  return tau;
}

}  // namespace effbound
