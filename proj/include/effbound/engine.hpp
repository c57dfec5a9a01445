#pragma once

#include <effbound/designs.hpp>
#include <effbound/rng.hpp>
#include <effbound/scenario.hpp>

#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <type_traits>
#include <vector>

namespace effbound {

struct RunOptions {
  unsigned jobs = 0;  // 0: std::thread::hardware_concurrency()
};

unsigned resolveJobs(unsigned jobs);

// Runs body(0..count-1) on up to `jobs` threads. Iterations must be independent.
void parallelFor(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& body);

using SeedDeriver = std::function<std::uint64_t(std::uint64_t seedBase, std::uint64_t rep)>;

// Applies the rule sequentially to a fixed covariate sample. noise[i] is the
// standardized outcome draw reserved for unit i; it is consumed only if the
// unit is assigned, as Y_i = mu(x_i,w_i) + theta c_w(x_i) + sigma(x_i,w_i) noise[i].
ExperimentLog simulate(const Submodel& sub, double theta, const DesignRule& rule, std::span<const int> x,
                       std::span<const double> noise, UniformSource& designU);

// One experiment of size n. Streams: covariates, design-U and outcomes are
// derived from `seed` by name.
ExperimentLog runOne(const Submodel& sub, double theta, const DesignRule& rule, std::size_t n,
                     std::uint64_t seed);

std::vector<ExperimentLog> runMany(const Submodel& sub, double theta, const DesignRule& rule, std::size_t n,
                                   std::size_t reps, std::uint64_t seedBase, RunOptions options = {},
                                   const SeedDeriver& derive = deriveRepSeed);

// Maps every replication log through f without retaining the logs; result r
// is always f(log of replication r) regardless of scheduling.
template <class F>
auto mapReps(const Submodel& sub, double theta, const DesignRule& rule, std::size_t n, std::size_t reps,
             std::uint64_t seedBase, F&& f, RunOptions options = {})
    -> std::vector<std::invoke_result_t<F&, const ExperimentLog&>> {
  using R = std::invoke_result_t<F&, const ExperimentLog&>;
  checkRule(rule, sub.base());
  std::vector<R> out(reps);
  parallelFor(reps, options.jobs, [&](std::size_t r) {
    const ExperimentLog log = runOne(sub, theta, rule, n, deriveRepSeed(seedBase, r));
    out[r] = f(log);
  });
  return out;
}

// CSV columns: rep,i,x,w,y
void writeLogCsv(std::ostream& os, std::span<const ExperimentLog> logs);

}  // namespace effbound
