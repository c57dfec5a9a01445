#include <effbound/error.hpp>
#include <effbound/lan.hpp>
#include <effbound/rng.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

namespace effbound {

LrDecomposition logLikelihoodRatio(const Submodel& sub, const ExperimentLog& log, double h) {
  if (log.n == 0) throw Error(ErrorCode::InvalidArgument, "empty log");
  const double n = static_cast<double>(log.n);
  const double rootN = std::sqrt(n);
  const double theta = h / rootN;
  const Informations info = informations(sub);

  LrDecomposition out;
  out.h = h;
  out.n = log.n;

  double ell = 0.0, sumSx = 0.0, sumSy = 0.0, sumInfo = 0.0;
  for (std::size_t i = 0; i < log.n; ++i) {
    const int x = log.x[i];
    ell += sub.logRatioX(x, theta);
    sumSx += sub.scoreX()(x);
    const Arm w = log.w[i];
    if (w < 0) continue;
    ell += sub.logRatioY(x, w, log.y[i], theta);
    sumSy += sub.scoreY(x, w, log.y[i]);
    sumInfo += info.conditional(x, w);
  }

  out.ellExact = ell;
  out.linX = h * sumSx / rootN;
  out.linY = h * sumSy / rootN;
  out.quadX = -0.5 * h * h * info.covariate;
  out.quadY = -0.5 * h * h * sumInfo / n;
  out.remainder = out.ellExact - (out.linX + out.linY + out.quadX + out.quadY);
  out.infoTildeN = info.covariate + sumInfo / n;
  return out;
}

LrDecomposition augmentWithZ(const Submodel&, const ExperimentLog& log, const LrDecomposition& lr, double iStar) {
  if (lr.augmented) throw Error(ErrorCode::InvalidArgument, "decomposition is already augmented");
  if (lr.infoTildeN > iStar + 1e-8) {
    std::ostringstream os;
    os.precision(12);
    os << "information " << lr.infoTildeN << " exceeds target " << iStar;
    throw Error(ErrorCode::InfoExceedsTarget, os.str());
  }
  const double gap = std::max(0.0, iStar - lr.infoTildeN);
  const double rootN = std::sqrt(static_cast<double>(log.n));

  RandomStream zStream(log.seed, stream::kAugmentation);
  double sumZ = 0.0;
  for (std::size_t i = 0; i < log.n; ++i) sumZ += zStream.normal();

  LrDecomposition out = lr;
  out.augmented = true;
  if (gap == 0.0) return out;
  out.linZ = sumZ * std::sqrt(gap) * lr.h / rootN;
  out.quadZ = -0.5 * lr.h * lr.h * gap;
  out.ellExact += out.linZ + out.quadZ;
  out.infoTildeN += gap;
  return out;
}

LrDecomposition augmentWithZ(const Submodel& sub, const ExperimentLog& log, double h, double iStar) {
  return augmentWithZ(sub, log, logLikelihoodRatio(sub, log, h), iStar);
}

double ksDistanceNormal(std::span<const double> xs, double mean, double var) {
  if (xs.empty()) throw Error(ErrorCode::InvalidArgument, "empty sample");
  if (!(var > 0.0)) throw Error(ErrorCode::InvalidArgument, "reference variance must be positive");
  std::vector<double> v(xs.begin(), xs.end());
  std::sort(v.begin(), v.end());
  const double m = static_cast<double>(v.size());
  const double scale = std::sqrt(2.0 * var);
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double F = 0.5 * std::erfc(-(v[i] - mean) / scale);
    d = std::max({d, F - static_cast<double>(i) / m, static_cast<double>(i + 1) / m - F});
  }
  return std::min(d, 1.0);
}

namespace {

struct RepStats {
  double ell;
  double absRemainder;
  double info;
};

std::vector<RepStats> collect(const Submodel& sub, const DesignRule& rule, double h, std::size_t n,
                              std::size_t reps, std::uint64_t seedBase, double iStar, const LanOptions& o) {
  return mapReps(
      sub, 0.0, rule, n, reps, seedBase,
      [&](const ExperimentLog& log) {
        LrDecomposition lr = logLikelihoodRatio(sub, log, h);
        if (o.augment) lr = augmentWithZ(sub, log, lr, iStar);
        return RepStats{lr.ellExact, std::abs(lr.remainder), lr.infoTildeN};
      },
      o.run);
}

double meanAbsRemainder(const std::vector<RepStats>& st) {
  double acc = 0.0;
  for (const auto& r : st) acc += r.absRemainder;
  return acc / static_cast<double>(st.size());
}

}  // namespace

LanReport lanDiagnostics(const Submodel& sub, const DesignRule& rule, double h, std::size_t n, std::size_t reps,
                         std::uint64_t seedBase, double iStar, const LanOptions& options) {
  if (reps < 2) throw Error(ErrorCode::DegenerateReps, "LAN diagnostics need at least two replications");
  if (!(iStar > 0.0)) throw Error(ErrorCode::InvalidArgument, "target information must be positive");

  const auto st = collect(sub, rule, h, n, reps, seedBase, iStar, options);
  const double R = static_cast<double>(reps);

  LanReport rep;
  rep.h = h;
  rep.n = n;
  rep.reps = reps;
  rep.augmented = options.augment;
  rep.targetMean = -0.5 * h * h * iStar;
  rep.targetVar = h * h * iStar;

  double mean = 0.0, info = 0.0;
  for (const auto& r : st) {
    mean += r.ell;
    info += r.info;
  }
  mean /= R;
  double ss = 0.0;
  for (const auto& r : st) ss += (r.ell - mean) * (r.ell - mean);
  rep.meanEll = mean;
  rep.varEll = ss / (R - 1.0);
  rep.mcSe = std::sqrt(rep.varEll / R);
  rep.meanInfoTildeN = info / R;
  rep.meanAbsRemainder = meanAbsRemainder(st);

  if (rep.targetVar > 0.0) {
    std::vector<double> ells(reps);
    for (std::size_t r = 0; r < reps; ++r) ells[r] = st[r].ell;
    rep.ksDistance = ksDistanceNormal(ells, rep.targetMean, rep.targetVar);
  } else {
    rep.ksSkipped = true;
  }

  if (options.quarterCheck && n / 4 >= 1) {
    rep.quarterN = n / 4;
    const auto q = collect(sub, rule, h, rep.quarterN, reps, seedBase, iStar, options);
    rep.meanAbsRemainderQuarter = meanAbsRemainder(q);
    rep.decayRatio = rep.meanAbsRemainderQuarter > 0.0 ? rep.meanAbsRemainder / rep.meanAbsRemainderQuarter : 0.0;
  }
  return rep;
}

}  // namespace effbound
