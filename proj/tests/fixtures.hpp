#pragma once

#include <effbound/allocation.hpp>
#include <effbound/scenario.hpp>

#include <random>
#include <vector>

namespace fx {

using effbound::Scenario;
using effbound::Table;

inline Table table(int rows, int cols, std::initializer_list<double> values) {
  Table t(rows, cols);
  auto it = values.begin();
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) t(i, j) = *it++;
  return t;
}

inline Scenario binary(std::vector<double> probs, Table mu, Table sigma2) {
  Scenario s;
  s.name = "binary";
  s.covariates.probs = std::move(probs);
  for (std::size_t k = 0; k < s.covariates.probs.size(); ++k) s.covariates.support.push_back("x" + std::to_string(k));
  s.outcomes.arms = 2;
  s.outcomes.mu = std::move(mu);
  s.outcomes.sigma2 = std::move(sigma2);
  return s;
}

// Same tables as configs/acceptance_binary.json.
inline Scenario hetero() {
  Scenario s = binary({0.3, 0.45, 0.25}, table(3, 2, {0.0, 1.0, 0.5, 0.8, 1.0, 2.5}),
                      table(3, 2, {1.0, 4.0, 2.25, 0.25, 0.5, 1.5}));
  s.name = "binary_hetero";
  return s;
}

// hetero() with the treated share capped at 0.3.
inline Scenario budget() {
  Scenario s = hetero();
  s.name = "binary_budget";
  s.constraint = effbound::ConstraintSpec{{table(3, 2, {0, 1, 0, 1, 0, 1})}, {0.3}};
  return s;
}

inline Scenario randomBinary(std::mt19937_64& g, int K) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> probs(static_cast<std::size_t>(K));
  double total = 0.0;
  for (auto& p : probs) total += (p = 0.05 + u(g));
  for (auto& p : probs) p /= total;
  // renormalize so the sum is 1 to rounding
  double acc = 0.0;
  for (int k = 0; k + 1 < K; ++k) acc += probs[static_cast<std::size_t>(k)];
  probs.back() = 1.0 - acc;
  Table mu(K, 2), s2(K, 2);
  for (int k = 0; k < K; ++k)
    for (int w = 0; w < 2; ++w) {
      mu(k, w) = 4.0 * u(g) - 2.0;
      s2(k, w) = 0.05 + 4.0 * u(g);
    }
  return binary(probs, mu, s2);
}

// Random multi-arm scenario with a general functional and 1 or 2 budget
// rows set below the unconstrained usage so that at least one row binds.
inline Scenario randomConstrained(std::mt19937_64& g) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int K = 2 + static_cast<int>(g() % 4);
  const int W = 2 + static_cast<int>(g() % 2);
  const int rows = 1 + static_cast<int>(g() % 2);
  Scenario s = randomBinary(g, K);
  s.name = "random_constrained";
  s.outcomes.arms = W;
  s.outcomes.mu = Table(K, W);
  s.outcomes.sigma2 = Table(K, W);
  effbound::GeneralTau f{Table(K, W), Table(K, W)};
  for (int k = 0; k < K; ++k)
    for (int w = 0; w < W; ++w) {
      s.outcomes.mu(k, w) = 4.0 * u(g) - 2.0;
      s.outcomes.sigma2(k, w) = 0.1 + 3.0 * u(g);
      f.a(k, w) = (u(g) < 0.5 ? -1.0 : 1.0) * (0.5 + u(g));
      f.b(k, w) = u(g) - 0.5;
    }
  s.functional = f;
  effbound::ConstraintSpec cs;
  for (int r = 0; r < rows; ++r) {
    Table load(K, W);
    for (int k = 0; k < K; ++k)
      for (int w = 0; w < W; ++w) load(k, w) = u(g) < 0.25 ? 0.0 : 0.2 + u(g);
    cs.r.push_back(load);
    cs.c.push_back(1.0);
  }
  s.constraint = cs;
  const Table free = effbound::optimalAllocation([&] {
                       Scenario t = s;
                       t.constraint.reset();
                       return t;
                     }())
                         .p;
  const auto usage = effbound::constraintUsage(s, free);
  for (int r = 0; r < rows; ++r) {
    const double frac = r == 0 ? 0.4 + 0.5 * u(g) : 0.5 + 0.8 * u(g);
    s.constraint->c[static_cast<std::size_t>(r)] = frac * usage[static_cast<std::size_t>(r)];
  }
  return s;
}

}  // namespace fx
