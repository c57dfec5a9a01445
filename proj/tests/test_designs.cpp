#include "fixtures.hpp"

#include <effbound/designs.hpp>
#include <effbound/engine.hpp>
#include <effbound/error.hpp>

#include <doctest.h>

#include <cmath>

using namespace effbound;

namespace {

Submodel baseModel(const Scenario& s) { return Submodel(s, Vector::Zero(s.strata()), Table::Zero(s.strata(), s.arms())); }

std::vector<DesignRule> allRules(const Scenario& s) {
  const Table ney = neymanAllocation(s).p;
  return {{"iid", IidPropensity{ney}},
          {"blocks", StratifiedBlocks{ney, 4}},
          {"pairs", MatchedPairs{}},
          {"two_stage", TwoStageAdaptive{0.1, Table::Constant(s.strata(), 2, 0.5), kDefaultClipEps}},
          {"alternation", DeterministicAlternation{}},
          {"full", FullTreatment{1}}};
}

}  // namespace

TEST_CASE("iid with propensity one treats everybody") {
  const Scenario s = fx::hetero();
  Table p(3, 2);
  p.col(0).setZero();
  p.col(1).setOnes();
  const auto log = runOne(baseModel(s), 0.0, {"all", IidPropensity{p}}, 500, 4);
  for (Arm w : log.w) CHECK(w == 1);
}

TEST_CASE("full treatment and alternation") {
  const Scenario s = fx::hetero();
  const auto full = runOne(baseModel(s), 0.0, {"full", FullTreatment{0}}, 300, 1);
  CHECK(realizedShares(full, s).share.col(0).minCoeff() == 1.0);
  const auto alt = runOne(baseModel(s), 0.0, {"alt", DeterministicAlternation{}}, 11, 1);
  for (std::size_t i = 0; i < 11; ++i) CHECK(alt.w[i] == static_cast<Arm>(i % 2));
}

TEST_CASE("matched pairs: partners receive opposite arms within each stratum") {
  const Scenario s = fx::hetero();
  const auto log = runOne(baseModel(s), 0.0, {"pairs", MatchedPairs{}}, 1001, 9);
  for (int x = 0; x < 3; ++x) {
    std::vector<Arm> seq;
    for (std::size_t i = 0; i < log.n; ++i)
      if (log.x[i] == x) seq.push_back(log.w[i]);
    for (std::size_t j = 0; j + 1 < seq.size(); j += 2) CHECK(seq[j] + seq[j + 1] == 1);
    if (seq.size() % 2 == 1) CHECK((seq.back() == 0 || seq.back() == 1));
  }
}

TEST_CASE("pairs and two-stage refuse more than two arms") {
  Scenario s = fx::binary({1.0}, Table::Zero(1, 3), Table::Ones(1, 3));
  s.outcomes.arms = 3;
  s.functional = GeneralTau{Table::Ones(1, 3), Table::Zero(1, 3)};
  try {
    checkRule({"pairs", MatchedPairs{}}, s);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RuleScenarioMismatch);
  }
}

TEST_CASE("stratified blocks: exhaustive enumeration of the uniforms gives marginal p") {
  const int B = 4;
  Table alloc(1, 2);
  alloc << 0.35, 0.65;
  const std::vector<int> x(B, 0);
  const int M = 1000;
  // shuffle draws u_j for j = 3, 2, 1 select one of j+1 positions
  Table hits = Table::Zero(B, 2);
  double total = 0.0;
  for (int k = 0; k < M; ++k)
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 3; ++b)
        for (int c = 0; c < 2; ++c) {
          ScriptedUniforms u({(k + 0.5) / M, (a + 0.5) / 4, (b + 0.5) / 3, (c + 0.5) / 2});
          Assigner as({"blocks", StratifiedBlocks{alloc, B}}, 1, 2, x);
          int treated = 0;
          for (std::size_t i = 0; i < B; ++i) {
            const Arm w = as.assign({x, {}, {}, i, u});
            hits(static_cast<int>(i), w) += 1.0;
            treated += w;
          }
          CHECK((treated == 2 || treated == 3));
          CHECK(u.consumed() == 4);
          total += 1.0;
        }
  for (int i = 0; i < B; ++i) CHECK(hits(i, 1) / total == doctest::Approx(0.65).epsilon(1e-12));
}

TEST_CASE("stratified blocks: complete blocks hold floor or ceil of B p") {
  const Scenario s = fx::hetero();
  const Table ney = neymanAllocation(s).p;
  const auto log = runOne(baseModel(s), 0.0, {"blocks", StratifiedBlocks{ney, 4}}, 4000, 21);
  for (int x = 0; x < 3; ++x) {
    std::vector<Arm> seq;
    for (std::size_t i = 0; i < log.n; ++i)
      if (log.x[i] == x) seq.push_back(log.w[i]);
    const double target = 4.0 * ney(x, 1);
    for (std::size_t j = 0; j + 4 <= seq.size(); j += 4) {
      const int t = seq[j] + seq[j + 1] + seq[j + 2] + seq[j + 3];
      CHECK((t == static_cast<int>(std::floor(target)) || t == static_cast<int>(std::ceil(target))));
    }
  }
}

TEST_CASE("realized shares approach their targets") {
  const Scenario s = fx::hetero();
  const Table ney = neymanAllocation(s).p;
  const Submodel sub = baseModel(s);
  const auto iid = runOne(sub, 0.0, {"iid", IidPropensity{ney}}, 10000, 33);
  const auto shares = realizedShares(iid, s);
  for (int x = 0; x < 3; ++x) CHECK(std::abs(shares.share(x, 1) - ney(x, 1)) <= 0.02);

  const DesignRule two{"two_stage", TwoStageAdaptive{0.1, Table::Constant(3, 2, 0.5), kDefaultClipEps}};
  const auto log = runOne(sub, 0.0, two, 10000, 35);
  const auto post = realizedShares(log, s, 1000);
  for (int x = 0; x < 3; ++x) CHECK(std::abs(post.share(x, 1) - ney(x, 1)) <= 0.05);
}

TEST_CASE("no rule looks at current or future outcomes") {
  const Scenario s = fx::hetero();
  const Submodel sub = baseModel(s);
  RandomStream xs(5, stream::kCovariates), zs(5, stream::kOutcomes);
  const std::size_t n = 400;
  std::vector<int> x(n);
  std::vector<double> noise(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = static_cast<int>(xs.uniform() * 3);
    noise[i] = zs.normal();
  }
  for (const auto& rule : allRules(s))
    for (std::size_t cut : {0u, 20u, 39u, 40u, 41u, 250u}) {
      std::vector<double> poisoned = noise;
      for (std::size_t i = cut; i < n; ++i) poisoned[i] = 1e6 * (i % 2 ? 1.0 : -1.0);
      RandomStream u1(7, stream::kDesign), u2(7, stream::kDesign);
      const auto a = simulate(sub, 0.0, rule, x, noise, u1);
      const auto b = simulate(sub, 0.0, rule, x, poisoned, u2);
      bool same = true;
      for (std::size_t i = 0; i <= std::min(cut, n - 1); ++i) same = same && a.w[i] == b.w[i];
      CHECK_MESSAGE(same, rule.name << " cut " << cut);
    }
}

TEST_CASE("designs are deterministic in the seed") {
  const Scenario s = fx::hetero();
  const Submodel sub = leastFavorableSubmodel(s, neymanAllocation(s));
  for (const auto& rule : allRules(s)) {
    const auto a = runOne(sub, 0.3, rule, 257, 99);
    const auto b = runOne(sub, 0.3, rule, 257, 99);
    CHECK(a.w == b.w);
    CHECK(a.y == b.y);
    CHECK(a.x == b.x);
  }
}
