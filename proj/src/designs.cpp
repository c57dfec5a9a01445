#include <effbound/designs.hpp>
#include <effbound/error.hpp>

#include <algorithm>
#include <array>
#include <cmath>

namespace effbound {

std::string kindName(const DesignKind& kind) {
  struct Visitor {
    std::string operator()(const IidPropensity&) const { return "iid"; }
    std::string operator()(const StratifiedBlocks&) const { return "stratified_blocks"; }
    std::string operator()(const MatchedPairs&) const { return "matched_pairs"; }
    std::string operator()(const TwoStageAdaptive&) const { return "two_stage"; }
    std::string operator()(const DeterministicAlternation&) const { return "alternation"; }
    std::string operator()(const FullTreatment&) const { return "full"; }
  };
  return std::visit(Visitor{}, kind);
}

namespace {

void checkAlloc(const Table& alloc, const Scenario& s, const std::string& rule) {
  if (alloc.rows() != s.strata() || alloc.cols() != s.arms())
    throw Error(ErrorCode::RuleScenarioMismatch, rule + ": allocation shape does not match scenario");
  for (int x = 0; x < s.strata(); ++x) {
    if ((alloc.row(x) < 0.0).any() || (alloc.row(x) > 1.0).any() || alloc.row(x).sum() > 1.0 + 1e-12)
      throw Error(ErrorCode::RuleScenarioMismatch, rule + ": allocation row " + std::to_string(x) + " is not a sub-probability vector");
  }
}

}  // namespace

void checkRule(const DesignRule& rule, const Scenario& s) {
  const std::string label = rule.name.empty() ? kindName(rule.kind) : rule.name;
  std::visit(
      [&](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, IidPropensity>) {
          checkAlloc(k.alloc, s, label);
        } else if constexpr (std::is_same_v<K, StratifiedBlocks>) {
          checkAlloc(k.alloc, s, label);
          if (k.blockSize < 2) throw Error(ErrorCode::RuleScenarioMismatch, label + ": block size must be >= 2");
        } else if constexpr (std::is_same_v<K, MatchedPairs>) {
          if (s.arms() != 2) throw Error(ErrorCode::RuleScenarioMismatch, label + ": matched pairs need exactly two arms");
        } else if constexpr (std::is_same_v<K, TwoStageAdaptive>) {
          if (s.arms() != 2) throw Error(ErrorCode::RuleScenarioMismatch, label + ": two-stage design needs exactly two arms");
          if (!(k.pilotFraction > 0.0 && k.pilotFraction < 1.0))
            throw Error(ErrorCode::RuleScenarioMismatch, label + ": pilot fraction must lie in (0,1)");
          checkAlloc(k.fallback, s, label);
        } else if constexpr (std::is_same_v<K, FullTreatment>) {
          if (k.arm < 0 || k.arm >= s.arms()) throw Error(ErrorCode::RuleScenarioMismatch, label + ": arm out of range");
        }
      },
      rule.kind);
}

Assigner::Assigner(DesignRule rule, int strata, int arms, std::span<const int> xAll)
    : rule_(std::move(rule)), strata_(strata), arms_(arms), n_(xAll.size()) {
  if (std::holds_alternative<StratifiedBlocks>(rule_.kind)) {
    blocks_.resize(static_cast<std::size_t>(strata_));
    blockPos_.assign(static_cast<std::size_t>(strata_), 0);
  }
  if (std::holds_alternative<MatchedPairs>(rule_.kind)) {
    if (arms_ != 2) throw Error(ErrorCode::RuleScenarioMismatch, "matched pairs need exactly two arms");
    stratumTotal_.assign(static_cast<std::size_t>(strata_), 0);
    stratumSeen_.assign(static_cast<std::size_t>(strata_), 0);
    pairFirst_.assign(static_cast<std::size_t>(strata_), kUnassigned);
    for (int x : xAll) ++stratumTotal_[static_cast<std::size_t>(x)];
  }
  if (const auto* ts = std::get_if<TwoStageAdaptive>(&rule_.kind)) {
    if (arms_ != 2) throw Error(ErrorCode::RuleScenarioMismatch, "two-stage design needs exactly two arms");
    pilotSize_ = std::clamp<std::size_t>(static_cast<std::size_t>(std::floor(ts->pilotFraction * static_cast<double>(n_))), 1, n_);
  }
}

Arm Assigner::drawFrom(const Table& alloc, int x, double u) const {
  double cum = 0.0;
  for (int w = 0; w < arms_; ++w) {
    cum += alloc(x, w);
    if (u < cum) return w;
  }
  return kUnassigned;
}

Arm Assigner::nextInBlock(int x, UniformSource& u) {
  const auto& kind = std::get<StratifiedBlocks>(rule_.kind);
  auto& block = blocks_[static_cast<std::size_t>(x)];
  auto& pos = blockPos_[static_cast<std::size_t>(x)];
  if (pos == block.size()) {
    const int B = kind.blockSize;
    // Systematic rounding: count_w = floor(C_w + v) - floor(C_{w-1} + v) with
    // C_w = B * sum_{j<=w} p(x,j); each count is floor or ceil of B p(x,w).
    const double v = u.uniform();
    block.clear();
    double cum = 0.0;
    long prev = 0;
    for (int w = 0; w < arms_; ++w) {
      cum += B * kind.alloc(x, w);
      const long upto = std::min<long>(static_cast<long>(std::floor(cum + v)), B);
      for (long j = prev; j < upto; ++j) block.push_back(w);
      prev = std::max(prev, upto);
    }
    while (static_cast<int>(block.size()) < B) block.push_back(kUnassigned);
    for (int j = B - 1; j >= 1; --j) {
      const int k = std::min(j, static_cast<int>(u.uniform() * (j + 1)));
      std::swap(block[static_cast<std::size_t>(j)], block[static_cast<std::size_t>(k)]);
    }
    pos = 0;
  }
  return block[pos++];
}

Arm Assigner::nextInPair(int x, UniformSource& u) {
  const auto xi = static_cast<std::size_t>(x);
  const std::size_t m = stratumSeen_[xi]++;
  if (m % 2 == 1) return 1 - pairFirst_[xi];
  const Arm w = u.uniform() < 0.5 ? 1 : 0;
  // an odd leftover unit is a fair coin; a pair opener fixes its partner
  if (m + 1 < stratumTotal_[xi]) pairFirst_[xi] = w;
  return w;
}

void Assigner::adaptFromPilot(const AssignmentContext& ctx) {
  const auto& kind = std::get<TwoStageAdaptive>(rule_.kind);
  const auto K = static_cast<std::size_t>(strata_);
  std::vector<std::array<double, 2>> sum(K, {0.0, 0.0}), sumSq(K, {0.0, 0.0});
  std::vector<std::array<double, 2>> count(K, {0.0, 0.0});
  for (std::size_t j = 0; j < pilotSize_; ++j) {
    const Arm w = ctx.wPast[j];
    if (w < 0) continue;
    const auto x = static_cast<std::size_t>(ctx.xAll[j]);
    const double y = ctx.yPast[j];
    sum[x][static_cast<std::size_t>(w)] += y;
    sumSq[x][static_cast<std::size_t>(w)] += y * y;
    count[x][static_cast<std::size_t>(w)] += 1.0;
  }
  adapted_ = kind.fallback;
  for (std::size_t x = 0; x < K; ++x) {
    if (count[x][0] < 2.0 || count[x][1] < 2.0) continue;
    double sd[2];
    for (int w = 0; w < 2; ++w) {
      const double m = count[x][w];
      const double mean = sum[x][w] / m;
      sd[w] = std::sqrt(std::max(0.0, (sumSq[x][w] - m * mean * mean) / (m - 1.0)));
    }
    if (sd[0] + sd[1] == 0.0) continue;
    const double e = std::clamp(sd[1] / (sd[0] + sd[1]), kind.clipEps, 1.0 - kind.clipEps);
    adapted_(static_cast<Eigen::Index>(x), 1) = e;
    adapted_(static_cast<Eigen::Index>(x), 0) = 1.0 - e;
  }
  adapted_ready_ = true;
}

Arm Assigner::assign(const AssignmentContext& ctx) {
  const int x = ctx.xAll[ctx.i];
  return std::visit(
      [&](const auto& k) -> Arm {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, IidPropensity>) {
          return drawFrom(k.alloc, x, ctx.u.uniform());
        } else if constexpr (std::is_same_v<K, StratifiedBlocks>) {
          return nextInBlock(x, ctx.u);
        } else if constexpr (std::is_same_v<K, MatchedPairs>) {
          return nextInPair(x, ctx.u);
        } else if constexpr (std::is_same_v<K, TwoStageAdaptive>) {
          if (ctx.i < pilotSize_) return drawFrom(k.fallback, x, ctx.u.uniform());
          if (!adapted_ready_) adaptFromPilot(ctx);
          return drawFrom(adapted_, x, ctx.u.uniform());
        } else if constexpr (std::is_same_v<K, DeterministicAlternation>) {
          return static_cast<Arm>(ctx.i % static_cast<std::size_t>(arms_));
        } else {
          return k.arm;
        }
      },
      rule_.kind);
}

RealizedShares realizedShares(const ExperimentLog& log, const Scenario& s, std::size_t from) {
  RealizedShares out;
  const int K = s.strata();
  const int W = s.arms();
  out.share = Table::Zero(K, W);
  out.counts.assign(static_cast<std::size_t>(K), 0);
  const int rows = s.constraint ? s.constraint->rows() : 0;
  out.usage.assign(static_cast<std::size_t>(rows), 0.0);

  std::size_t m = 0;
  for (std::size_t i = from; i < log.n; ++i, ++m) {
    const int x = log.x[i];
    const Arm w = log.w[i];
    ++out.counts[static_cast<std::size_t>(x)];
    if (w < 0) continue;
    out.share(x, w) += 1.0;
    for (int k = 0; k < rows; ++k) out.usage[static_cast<std::size_t>(k)] += s.constraint->r[static_cast<std::size_t>(k)](x, w);
  }
  for (int x = 0; x < K; ++x)
    if (out.counts[static_cast<std::size_t>(x)] > 0) out.share.row(x) /= static_cast<double>(out.counts[static_cast<std::size_t>(x)]);
  if (m > 0)
    for (auto& u : out.usage) u /= static_cast<double>(m);
  return out;
}

}  // namespace effbound
