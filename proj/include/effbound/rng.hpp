#pragma once

// Reproducible random streams. Every stream is a std::mt19937_64 seeded from
// a pure function of (seed, stream name), and replication seeds come from
// (seedBase, rep). Uniform and normal variates are produced here rather than
// through <random> distributions so that the sequence is identical across
// standard-library implementations.

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace effbound {

namespace stream {
inline constexpr std::string_view kCovariates = "covariates";
inline constexpr std::string_view kDesign = "design-U";
inline constexpr std::string_view kOutcomes = "outcomes";
inline constexpr std::string_view kAugmentation = "augmentation-Z";
}  // namespace stream

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view text);

// seed_r = splitmix64(seedBase ^ splitmix64(rep + 0x9E3779B97F4A7C15))
std::uint64_t deriveRepSeed(std::uint64_t seedBase, std::uint64_t rep);
// stream seed = splitmix64(seed ^ fnv1a64(name))
std::uint64_t deriveStreamSeed(std::uint64_t seed, std::string_view name);

// Source of uniform variates on [0, 1).
class UniformSource {
 public:
  virtual ~UniformSource() = default;
  virtual double uniform() = 0;
};

class RandomStream final : public UniformSource {
 public:
  RandomStream(std::uint64_t seed, std::string_view name) : engine_(deriveStreamSeed(seed, name)) {}

  // 53-bit resolution
  double uniform() override { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Box-Muller, cosine branch only; consumes two uniforms.
  double normal();

 private:
  std::mt19937_64 engine_;
};

// Replays a fixed list of uniforms; used to drive designs exhaustively.
class ScriptedUniforms final : public UniformSource {
 public:
  explicit ScriptedUniforms(std::vector<double> values) : values_(std::move(values)) {}
  double uniform() override;
  std::size_t consumed() const { return next_; }

 private:
  std::vector<double> values_;
  std::size_t next_ = 0;
};

}  // namespace effbound
