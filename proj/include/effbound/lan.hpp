#pragma once

// Exact log-likelihood ratios along a Submodel, their second-order expansion,
// the information process and Monte Carlo checks of the limit law.

#include <effbound/designs.hpp>
#include <effbound/engine.hpp>
#include <effbound/scenario.hpp>

#include <span>

namespace effbound {

// ell = log dP_{h/sqrt(n)} / dP_0 evaluated on one log, split as
// ell = linX + linY + quadX + quadY + linZ + quadZ + remainder.
struct LrDecomposition {
  double h = 0.0;
  std::size_t n = 0;
  double ellExact = 0.0;
  double linX = 0.0;   // (1/sqrt n) sum_i h sX(X_i)
  double linY = 0.0;   // (1/sqrt n) sum_i h s_{W_i}(Y_i|X_i)
  double quadX = 0.0;  // -h^2 I_X / 2
  double quadY = 0.0;  // -(1/2n) sum_i h^2 I_{Y(W_i)|X}(X_i)
  double linZ = 0.0;   // augmentation terms, zero unless augmented
  double quadZ = 0.0;
  double remainder = 0.0;
  double infoTildeN = 0.0;
  bool augmented = false;
};

LrDecomposition logLikelihoodRatio(const Submodel& sub, const ExperimentLog& log, double h);

// Pads the information to iStar with n standard normals drawn from the
// augmentation stream of log.seed. Throws InfoExceedsTarget if
// infoTildeN > iStar + 1e-8.
LrDecomposition augmentWithZ(const Submodel& sub, const ExperimentLog& log, const LrDecomposition& lr, double iStar);

// Convenience: logLikelihoodRatio followed by augmentWithZ.
LrDecomposition augmentWithZ(const Submodel& sub, const ExperimentLog& log, double h, double iStar);

// Two-sided sup distance between the empirical CDF of xs and Normal(mean, var).
double ksDistanceNormal(std::span<const double> xs, double mean, double var);

struct LanReport {
  double h = 0.0;
  std::size_t n = 0;
  std::size_t reps = 0;
  double meanEll = 0.0;
  double varEll = 0.0;  // unbiased
  double mcSe = 0.0;    // sqrt(varEll / reps)
  double targetMean = 0.0;
  double targetVar = 0.0;
  double ksDistance = 0.0;
  bool ksSkipped = false;  // degenerate limit (h = 0 or iStar = 0)
  double meanAbsRemainder = 0.0;
  double meanInfoTildeN = 0.0;
  bool augmented = false;
  std::size_t quarterN = 0;              // 0 if the n/4 evaluation was skipped
  double meanAbsRemainderQuarter = 0.0;  // at quarterN
  double decayRatio = 0.0;               // meanAbsRemainder / meanAbsRemainderQuarter
};

struct LanOptions {
  bool augment = false;
  bool quarterCheck = true;
  RunOptions run;
};

LanReport lanDiagnostics(const Submodel& sub, const DesignRule& rule, double h, std::size_t n, std::size_t reps,
                         std::uint64_t seedBase, double iStar, const LanOptions& options = {});

}  // namespace effbound
