#include <effbound/engine.hpp>
#include <effbound/error.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

namespace effbound {

unsigned resolveJobs(unsigned jobs) {
  if (jobs > 0) return jobs;
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallelFor(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& body) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(resolveJobs(jobs), std::max<std::size_t>(count, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failureMutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failureMutex);
          if (!failure) failure = std::current_exception();
          next.store(count);
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

ExperimentLog simulate(const Submodel& sub, double theta, const DesignRule& rule, std::span<const int> x,
                       std::span<const double> noise, UniformSource& designU) {
  const auto& s = sub.base();
  const std::size_t n = x.size();
  if (noise.size() != n) throw Error(ErrorCode::InvalidArgument, "noise length differs from sample size");

  ExperimentLog log;
  log.n = n;
  log.theta = theta;
  log.rule = rule.name.empty() ? kindName(rule.kind) : rule.name;
  log.x.assign(x.begin(), x.end());
  log.w.assign(n, kUnassigned);
  log.y.assign(n, 0.0);

  Assigner assigner(rule, s.strata(), s.arms(), x);
  for (std::size_t i = 0; i < n; ++i) {
    const AssignmentContext ctx{x, std::span<const double>(log.y.data(), i), std::span<const Arm>(log.w.data(), i), i,
                                designU};
    const Arm w = assigner.assign(ctx);
    log.w[i] = w;
    if (w == kUnassigned) continue;
    const int xi = x[i];
    log.y[i] = sub.outcomeMean(xi, w, theta) + std::sqrt(s.outcomes.sigma2(xi, w)) * noise[i];
  }
  return log;
}

ExperimentLog runOne(const Submodel& sub, double theta, const DesignRule& rule, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "sample size must be >= 1");
  const auto& s = sub.base();

  const Vector q = sub.covariateProbs(theta);
  std::vector<double> cum(static_cast<std::size_t>(s.strata()));
  double acc = 0.0;
  for (int k = 0; k < s.strata(); ++k) cum[static_cast<std::size_t>(k)] = (acc += q(k));

  RandomStream covStream(seed, stream::kCovariates);
  std::vector<int> x(n);
  for (auto& xi : x) {
    const double u = covStream.uniform() * acc;
    const auto it = std::upper_bound(cum.begin(), cum.end(), u);
    xi = static_cast<int>(std::min<std::ptrdiff_t>(it - cum.begin(), s.strata() - 1));
  }

  RandomStream outStream(seed, stream::kOutcomes);
  std::vector<double> noise(n);
  for (auto& e : noise) e = outStream.normal();

  RandomStream designStream(seed, stream::kDesign);
  ExperimentLog log = simulate(sub, theta, rule, x, noise, designStream);
  log.seed = seed;
  return log;
}

std::vector<ExperimentLog> runMany(const Submodel& sub, double theta, const DesignRule& rule, std::size_t n,
                                   std::size_t reps, std::uint64_t seedBase, RunOptions options,
                                   const SeedDeriver& derive) {
  if (reps < 1) throw Error(ErrorCode::InvalidArgument, "reps must be >= 1");
  checkRule(rule, sub.base());
  std::vector<ExperimentLog> out(reps);
  parallelFor(reps, options.jobs, [&](std::size_t r) { out[r] = runOne(sub, theta, rule, n, derive(seedBase, r)); });
  return out;
}

void writeLogCsv(std::ostream& os, std::span<const ExperimentLog> logs) {
  os << "rep,i,x,w,y\n";
  char buf[64];
  for (std::size_t r = 0; r < logs.size(); ++r) {
    const auto& log = logs[r];
    for (std::size_t i = 0; i < log.n; ++i) {
      std::snprintf(buf, sizeof buf, "%.12g", log.y[i]);
      os << r << ',' << i << ',' << log.x[i] << ',' << log.w[i] << ',' << buf << '\n';
    }
  }
}

}  // namespace effbound
