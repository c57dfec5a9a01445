#include "fixtures.hpp"

#include <effbound/engine.hpp>

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace effbound;

TEST_CASE("one unit under full treatment of arm 0") {
  const Scenario s = fx::hetero();
  const Submodel sub(s, Vector::Zero(3), Table::Zero(3, 2));
  const std::vector<int> x{2};
  const std::vector<double> noise{0.5};
  ScriptedUniforms none({});
  const auto log = simulate(sub, 0.0, {"full0", FullTreatment{0}}, x, noise, none);
  REQUIRE(log.n == 1);
  CHECK(log.w[0] == 0);
  CHECK(log.y[0] == doctest::Approx(1.0 + std::sqrt(0.5) * 0.5));
  CHECK(none.consumed() == 0);
}

TEST_CASE("outcome draws include the submodel mean shift") {
  const Scenario s = fx::hetero();
  const Submodel sub = leastFavorableSubmodel(s, neymanAllocation(s));
  const std::vector<int> x{0, 1};
  const std::vector<double> noise{0.0, -1.0};
  ScriptedUniforms none({});
  const auto log = simulate(sub, 0.25, {"full1", FullTreatment{1}}, x, noise, none);
  CHECK(log.y[0] == doctest::Approx(s.outcomes.mu(0, 1) + 0.25 * sub.meanShift()(0, 1)));
  CHECK(log.y[1] == doctest::Approx(s.outcomes.mu(1, 1) + 0.25 * sub.meanShift()(1, 1) - 0.5));
}

TEST_CASE("cell means and covariate frequencies") {
  const Scenario s = fx::hetero();
  const Submodel sub = leastFavorableSubmodel(s, neymanAllocation(s));
  const double theta = 0.2;
  const std::size_t n = 200000;
  const auto log = runOne(sub, theta, {"iid", IidPropensity{Table::Constant(3, 2, 0.5)}}, n, 12);
  const Vector q = sub.covariateProbs(theta);
  Table sum = Table::Zero(3, 2), cnt = Table::Zero(3, 2);
  std::vector<double> freq(3, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    sum(log.x[i], log.w[i]) += log.y[i];
    cnt(log.x[i], log.w[i]) += 1.0;
    freq[static_cast<std::size_t>(log.x[i])] += 1.0;
  }
  for (int x = 0; x < 3; ++x) {
    const double f = freq[static_cast<std::size_t>(x)] / n;
    CHECK(std::abs(f - q(x)) <= 4.0 * std::sqrt(q(x) * (1 - q(x)) / n));
    for (int w = 0; w < 2; ++w) {
      const double m = cnt(x, w);
      const double sd = std::sqrt(s.outcomes.sigma2(x, w));
      CHECK(std::abs(sum(x, w) / m - sub.outcomeMean(x, w, theta)) <= 4.0 * sd / std::sqrt(m));
    }
  }
}

TEST_CASE("replications are reproducible and independent of scheduling") {
  const Scenario s = fx::hetero();
  const Submodel sub = leastFavorableSubmodel(s, neymanAllocation(s));
  const DesignRule rule{"two_stage", TwoStageAdaptive{0.1, Table::Constant(3, 2, 0.5), kDefaultClipEps}};
  const auto serial = runMany(sub, 0.1, rule, 300, 16, 77, {1});
  const auto threaded = runMany(sub, 0.1, rule, 300, 16, 77, {4});
  REQUIRE(serial.size() == 16);
  for (std::size_t r = 0; r < 16; ++r) {
    CHECK(serial[r].y == threaded[r].y);
    CHECK(serial[r].w == threaded[r].w);
    const auto one = runOne(sub, 0.1, rule, 300, deriveRepSeed(77, r));
    CHECK(one.y == serial[r].y);
  }
  CHECK(serial[0].y != serial[1].y);

  const auto sums = mapReps(sub, 0.1, rule, 300, 16, 77, [](const ExperimentLog& l) { return l.y[5] + l.w[7]; }, {3});
  for (std::size_t r = 0; r < 16; ++r) CHECK(sums[r] == serial[r].y[5] + serial[r].w[7]);

  std::ostringstream a, b;
  writeLogCsv(a, serial);
  writeLogCsv(b, threaded);
  CHECK(a.str() == b.str());
}

TEST_CASE("seed derivation") {
  CHECK(deriveStreamSeed(1, "covariates") != deriveStreamSeed(1, "outcomes"));
  CHECK(deriveRepSeed(5, 0) != deriveRepSeed(5, 1));
  RandomStream a(3, "x"), b(3, "x");
  for (int k = 0; k < 10; ++k) CHECK(a.uniform() == b.uniform());
  RandomStream u(8, "z");
  double s = 0.0, s2 = 0.0;
  const int m = 200000;
  for (int k = 0; k < m; ++k) {
    const double z = u.normal();
    s += z;
    s2 += z * z;
  }
  CHECK(std::abs(s / m) <= 4.0 / std::sqrt(m));
  CHECK(std::abs(s2 / m - 1.0) <= 4.0 * std::sqrt(2.0 / m));
}
