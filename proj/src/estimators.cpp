#include <effbound/error.hpp>
#include <effbound/estimators.hpp>

#include <cmath>
#include <sstream>

namespace effbound {

std::string kindName(const EstimatorKind& kind) {
  struct Visitor {
    std::string operator()(const DiffMeans&) const { return "diff_means"; }
    std::string operator()(const IpwHT&) const { return "ipw_ht"; }
    std::string operator()(const IpwHajek&) const { return "ipw_hajek"; }
    std::string operator()(const AipwOracle&) const { return "aipw_oracle"; }
    std::string operator()(const AipwPlugin&) const { return "aipw_plugin"; }
    std::string operator()(const StratifiedMeans&) const { return "stratified_means"; }
  };
  return std::visit(Visitor{}, kind);
}

namespace {

struct Cells {
  Table sum;
  Table count;
  Vector stratumCount;
};

Cells tally(const Scenario& s, const ExperimentLog& log) {
  Cells c{Table::Zero(s.strata(), s.arms()), Table::Zero(s.strata(), s.arms()), Vector::Zero(s.strata())};
  for (std::size_t i = 0; i < log.n; ++i) {
    const int x = log.x[i];
    c.stratumCount(x) += 1.0;
    const Arm w = log.w[i];
    if (w < 0) continue;
    c.sum(x, w) += s.loading(x, w) * log.y[i] + s.offset(x, w);
    c.count(x, w) += 1.0;
  }
  return c;
}

double propensity(const Table& alloc, const Scenario& s, int x, int w, double clipEps) {
  if (alloc.rows() != s.strata() || alloc.cols() != s.arms())
    throw Error(ErrorCode::InvalidArgument, "estimator allocation shape does not match scenario");
  const double p = alloc(x, w);
  if (!(p >= clipEps)) {
    std::ostringstream os;
    os << "p(" << x << "," << w << ") = " << p << " below clipEps on an observed arm";
    throw Error(ErrorCode::PropensityOutOfRange, os.str());
  }
  return p;
}

double diffMeans(const Scenario& s, const ExperimentLog& log) {
  if (!s.isAte()) throw Error(ErrorCode::InvalidArgument, "diff_means estimates the binary ATE only");
  double sum[2] = {0.0, 0.0}, count[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < log.n; ++i) {
    const Arm w = log.w[i];
    if (w < 0) continue;
    sum[w] += log.y[i];
    count[w] += 1.0;
  }
  if (count[0] == 0.0 || count[1] == 0.0) throw Error(ErrorCode::EmptyArm, "diff_means needs both arms observed");
  return sum[1] / count[1] - sum[0] / count[0];
}

double ipwHt(const Table& alloc, const Scenario& s, const ExperimentLog& log, double clipEps) {
  double acc = 0.0;
  for (std::size_t i = 0; i < log.n; ++i) {
    const Arm w = log.w[i];
    if (w < 0) continue;
    const int x = log.x[i];
    acc += (s.loading(x, w) * log.y[i] + s.offset(x, w)) / propensity(alloc, s, x, w, clipEps);
  }
  return acc / static_cast<double>(log.n);
}

double ipwHajek(const Table& alloc, const Scenario& s, const ExperimentLog& log, double clipEps) {
  Vector num = Vector::Zero(s.arms()), den = Vector::Zero(s.arms());
  for (std::size_t i = 0; i < log.n; ++i) {
    const Arm w = log.w[i];
    if (w < 0) continue;
    const int x = log.x[i];
    const double inv = 1.0 / propensity(alloc, s, x, w, clipEps);
    num(w) += (s.loading(x, w) * log.y[i] + s.offset(x, w)) * inv;
    den(w) += inv;
  }
  double tau = 0.0;
  for (int w = 0; w < s.arms(); ++w) {
    if (den(w) == 0.0) throw Error(ErrorCode::EmptyArm, "ipw_hajek: arm " + std::to_string(w) + " never observed");
    tau += num(w) / den(w);
  }
  return tau;
}

double aipwOracle(const Table& alloc, const Scenario& s, const ExperimentLog& log, double clipEps) {
  const Table muT = s.transformedMean();
  const Vector regression = muT.rowwise().sum();
  double acc = 0.0;
  for (std::size_t i = 0; i < log.n; ++i) {
    const int x = log.x[i];
    acc += regression(x);
    const Arm w = log.w[i];
    if (w < 0) continue;
    const double yT = s.loading(x, w) * log.y[i] + s.offset(x, w);
    acc += (yT - muT(x, w)) / propensity(alloc, s, x, w, clipEps);
  }
  return acc / static_cast<double>(log.n);
}

double aipwPlugin(const Table& alloc, const Scenario& s, const ExperimentLog& log, EstimateFlags& flags,
                  double clipEps) {
  const Cells c = tally(s, log);
  const int K = s.strata();
  const int W = s.arms();

  // Cell means; an empty cell borrows the pooled arm mean (or 0 if the arm was never observed).
  Table cellMean = Table::Zero(K, W);
  for (int w = 0; w < W; ++w) {
    const double armCount = c.count.col(w).sum();
    const double pooled = armCount > 0.0 ? c.sum.col(w).sum() / armCount : 0.0;
    for (int x = 0; x < K; ++x) {
      if (c.count(x, w) > 0.0) {
        cellMean(x, w) = c.sum(x, w) / c.count(x, w);
        if (c.count(x, w) < 2.0) flags.smallCell = true;
      } else {
        cellMean(x, w) = pooled;
        if (c.stratumCount(x) > 0.0) flags.emptyCell = true;
      }
    }
  }

  double acc = 0.0;
  for (std::size_t i = 0; i < log.n; ++i) {
    const int x = log.x[i];
    const Arm wi = log.w[i];
    double yT = 0.0;
    if (wi >= 0) yT = s.loading(x, wi) * log.y[i] + s.offset(x, wi);
    for (int w = 0; w < W; ++w) {
      double m = cellMean(x, w);
      if (w == wi && c.count(x, w) >= 2.0) m = (c.sum(x, w) - yT) / (c.count(x, w) - 1.0);  // leave-one-out
      else if (w == wi) m = yT;
      acc += m;
      if (w == wi) acc += (yT - m) / propensity(alloc, s, x, w, clipEps);
    }
  }
  return acc / static_cast<double>(log.n);
}

double stratifiedMeans(const Scenario& s, const ExperimentLog& log) {
  const Cells c = tally(s, log);
  double tau = 0.0;
  for (int x = 0; x < s.strata(); ++x) {
    if (c.stratumCount(x) == 0.0) continue;
    double inner = 0.0;
    for (int w = 0; w < s.arms(); ++w) {
      if (c.count(x, w) == 0.0) {
        std::ostringstream os;
        os << "stratified_means: no observation in cell (" << x << "," << w << ")";
        throw Error(ErrorCode::EmptyCell, os.str());
      }
      inner += c.sum(x, w) / c.count(x, w);
    }
    tau += c.stratumCount(x) / static_cast<double>(log.n) * inner;
  }
  return tau;
}

}  // namespace

double estimate(const Estimator& est, const Scenario& s, const ExperimentLog& log, EstimateFlags* flags,
                double clipEps) {
  if (log.n == 0) throw Error(ErrorCode::InvalidArgument, "empty log");
  EstimateFlags local;
  EstimateFlags& f = flags ? *flags : local;
  return std::visit(
      [&](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, DiffMeans>) return diffMeans(s, log);
        else if constexpr (std::is_same_v<K, IpwHT>) return ipwHt(k.alloc, s, log, clipEps);
        else if constexpr (std::is_same_v<K, IpwHajek>) return ipwHajek(k.alloc, s, log, clipEps);
        else if constexpr (std::is_same_v<K, AipwOracle>) return aipwOracle(k.alloc, s, log, clipEps);
        else if constexpr (std::is_same_v<K, AipwPlugin>) return aipwPlugin(k.alloc, s, log, f, clipEps);
        else return stratifiedMeans(s, log);
      },
      est.kind);
}

RiskReport summarizeRisk(std::span<const double> estimates, double truth, std::size_t n, double theta) {
  const std::size_t reps = estimates.size();
  if (reps < 2) throw Error(ErrorCode::DegenerateReps, "at least two replications are needed for a variance");
  RiskReport r;
  r.reps = reps;
  r.n = n;
  r.theta = theta;
  r.truth = truth;
  const double R = static_cast<double>(reps);
  double mean = 0.0;
  for (double e : estimates) mean += e;
  mean /= R;
  double var = 0.0, mse = 0.0, mae = 0.0;
  for (double e : estimates) {
    var += (e - mean) * (e - mean);
    mse += (e - truth) * (e - truth);
    mae += std::abs(e - truth);
  }
  const double N = static_cast<double>(n);
  r.mean = mean;
  r.bias = mean - truth;
  r.varianceTimesN = N * var / R;
  r.mseTimesN = N * mse / R;
  r.maeTimesSqrtN = std::sqrt(N) * mae / R;
  r.mcStdError = r.varianceTimesN * std::sqrt(2.0 / (R - 1.0));
  return r;
}

std::vector<RiskReport> riskOverReps(std::span<const Estimator> ests, const Submodel& sub, double theta,
                                     const DesignRule& rule, std::size_t n, std::size_t reps, std::uint64_t seedBase,
                                     RunOptions options) {
  if (reps < 2) throw Error(ErrorCode::DegenerateReps, "at least two replications are needed for a variance");
  const Scenario& s = sub.base();
  const double truth = tauAt(sub, theta);
  auto perRep = mapReps(
      sub, theta, rule, n, reps, seedBase,
      [&](const ExperimentLog& log) {
        std::vector<double> out(ests.size());
        for (std::size_t j = 0; j < ests.size(); ++j) out[j] = estimate(ests[j], s, log, nullptr, sub.clipEps());
        return out;
      },
      options);

  std::vector<RiskReport> reports;
  std::vector<double> column(reps);
  for (std::size_t j = 0; j < ests.size(); ++j) {
    for (std::size_t r = 0; r < reps; ++r) column[r] = perRep[r][j];
    reports.push_back(summarizeRisk(column, truth, n, theta));
  }
  return reports;
}

RiskReport riskOverReps(const Estimator& est, const Submodel& sub, double theta, const DesignRule& rule, std::size_t n,
                        std::size_t reps, std::uint64_t seedBase, RunOptions options) {
  return riskOverReps(std::span<const Estimator>(&est, 1), sub, theta, rule, n, reps, seedBase, options).front();
}

}  // namespace effbound
