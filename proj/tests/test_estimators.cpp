#include "fixtures.hpp"

#include <effbound/error.hpp>
#include <effbound/estimators.hpp>

#include <doctest.h>

#include <cmath>

using namespace effbound;

namespace {

ExperimentLog makeLog(std::vector<int> x, std::vector<Arm> w, std::vector<double> y) {
  ExperimentLog log;
  log.n = x.size();
  log.x = std::move(x);
  log.w = std::move(w);
  log.y = std::move(y);
  return log;
}

std::vector<Estimator> everyKind(const Table& p) {
  return {{"dm", DiffMeans{}},         {"ht", IpwHT{p}},         {"hajek", IpwHajek{p}},
          {"oracle", AipwOracle{p}},   {"plugin", AipwPlugin{p}}, {"strat", StratifiedMeans{}}};
}

}  // namespace

TEST_CASE("constant outcomes give a zero effect") {
  const Scenario s = fx::binary({0.5, 0.5}, Table::Constant(2, 2, 3.0), Table::Ones(2, 2));
  const auto log = makeLog({0, 0, 0, 0, 1, 1, 1, 1}, {0, 1, 0, 1, 1, 0, 0, 1}, std::vector<double>(8, 3.0));
  for (const auto& e : everyKind(Table::Constant(2, 2, 0.5))) {
    if (std::holds_alternative<IpwHT>(e.kind)) continue;  // not location invariant
    CHECK(estimate(e, s, log) == doctest::Approx(0.0).scale(1.0));
  }
}

TEST_CASE("Horvitz-Thompson by hand") {
  const Scenario s = fx::binary({1.0}, Table::Zero(1, 2), Table::Ones(1, 2));
  const auto log = makeLog({0, 0}, {1, 0}, {1.0, 0.0});
  CHECK(estimate({"ht", IpwHT{Table::Constant(1, 2, 0.5)}}, s, log) == doctest::Approx(1.0));
  const auto log2 = makeLog({0, 0, 0}, {1, 0, 0}, {2.0, 1.0, 0.5});
  Table p(1, 2);
  p << 0.75, 0.25;
  CHECK(estimate({"ht", IpwHT{p}}, s, log2) == doctest::Approx((2.0 / 0.25 - 1.0 / 0.75 - 0.5 / 0.75) / 3.0));
  CHECK(estimate({"hajek", IpwHajek{p}}, s, log2) == doctest::Approx(2.0 - 0.75));
}

TEST_CASE("error conditions") {
  const Scenario s = fx::binary({0.5, 0.5}, Table::Zero(2, 2), Table::Ones(2, 2));
  const auto allTreated = makeLog({0, 1}, {1, 1}, {1.0, 2.0});
  auto code = [&](const Estimator& e, const ExperimentLog& l) {
    try {
      estimate(e, s, l);
    } catch (const Error& err) {
      return err.code();
    }
    return ErrorCode::InvalidArgument;
  };
  CHECK(code({"dm", DiffMeans{}}, allTreated) == ErrorCode::EmptyArm);
  CHECK(code({"strat", StratifiedMeans{}}, allTreated) == ErrorCode::EmptyCell);
  Table tiny = Table::Constant(2, 2, 0.5);
  tiny(0, 1) = 1e-4;
  CHECK(code({"ht", IpwHT{tiny}}, allTreated) == ErrorCode::PropensityOutOfRange);

  const std::vector<double> one{1.0};
  CHECK_THROWS_AS(summarizeRisk(one, 0.0, 10, 0.0), Error);
}

TEST_CASE("plug-in AIPW with leave-one-out means equals stratified means") {
  const Scenario s = fx::hetero();
  const Table ney = neymanAllocation(s).p;
  const Submodel sub(s, Vector::Zero(3), Table::Zero(3, 2));
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto log = runOne(sub, 0.0, {"iid", IidPropensity{ney}}, 400, seed);
    EstimateFlags f;
    const double a = estimate({"plugin", AipwPlugin{ney}}, s, log, &f);
    CHECK_FALSE(f.emptyCell);
    CHECK(std::abs(a - estimate({"strat", StratifiedMeans{}}, s, log)) <= 1e-12);
  }
}

TEST_CASE("translation and shift equivariance") {
  const Scenario s = fx::hetero();
  const Table half = Table::Constant(3, 2, 0.5);
  const Submodel sub(s, Vector::Zero(3), Table::Zero(3, 2));
  const auto log = runOne(sub, 0.0, {"iid", IidPropensity{half}}, 300, 3);
  auto shifted = log;
  for (std::size_t i = 0; i < log.n; ++i) shifted.y[i] += 2.0 + (log.w[i] == 1 ? 0.75 : 0.0);
  for (const auto& e : {Estimator{"dm", DiffMeans{}}, Estimator{"hajek", IpwHajek{half}},
                        Estimator{"plugin", AipwPlugin{half}}, Estimator{"strat", StratifiedMeans{}}})
    CHECK(estimate(e, s, shifted) == doctest::Approx(estimate(e, s, log) + 0.75).epsilon(1e-12));
}

TEST_CASE("risk summaries") {
  const std::vector<double> est{1.0, 2.0, 4.0, 5.0};
  const auto r = summarizeRisk(est, 2.0, 100, 0.0);
  CHECK(r.mean == doctest::Approx(3.0));
  CHECK(r.bias == doctest::Approx(1.0));
  CHECK(r.varianceTimesN == doctest::Approx(100.0 * 2.5));
  CHECK(r.mseTimesN == doctest::Approx(100.0 * 3.5));
  CHECK(r.mseTimesN >= r.varianceTimesN);
  CHECK(r.maeTimesSqrtN == doctest::Approx(10.0 * 1.5));
  CHECK(r.mcStdError == doctest::Approx(250.0 * std::sqrt(2.0 / 3.0)));
}

TEST_CASE("oracle AIPW is unbiased and difference in means respects the floor") {
  const Scenario s = fx::hetero();
  const auto ney = neymanAllocation(s);
  const double v = evalBoundGeneral(s, ney).v;
  const Submodel sub = leastFavorableSubmodel(s, ney);
  const std::size_t n = 500, reps = 2000;
  const auto oracle = riskOverReps({"oracle", AipwOracle{ney.p}}, sub, 0.0, {"iid", IidPropensity{ney.p}}, n, reps, 41);
  CHECK(std::abs(oracle.bias) <= 4.0 * std::sqrt(oracle.varianceTimesN / n / reps));
  CHECK(oracle.varianceTimesN == doctest::Approx(v).epsilon(4.0 * oracle.mcStdError / v));

  const Table half = Table::Constant(3, 2, 0.5);
  const auto dm = riskOverReps({"dm", DiffMeans{}}, sub, 0.0, {"iid", IidPropensity{half}}, n, reps, 43);
  CHECK(dm.varianceTimesN >= 0.95 * v);

  const std::vector<Estimator> both{{"oracle", AipwOracle{ney.p}}, {"strat", StratifiedMeans{}}};
  const auto shared = riskOverReps(both, sub, 0.0, {"iid", IidPropensity{ney.p}}, n, 50, 41);
  const auto alone = riskOverReps(both[0], sub, 0.0, {"iid", IidPropensity{ney.p}}, n, 50, 41);
  CHECK(shared[0].mean == alone.mean);
}
