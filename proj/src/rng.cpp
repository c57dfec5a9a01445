#include <effbound/error.hpp>
#include <effbound/rng.hpp>

#include <cmath>
#include <numbers>

namespace effbound {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::uint64_t deriveRepSeed(std::uint64_t seedBase, std::uint64_t rep) {
  return splitmix64(seedBase ^ splitmix64(rep + 0x9E3779B97F4A7C15ULL));
}

std::uint64_t deriveStreamSeed(std::uint64_t seed, std::string_view name) {
  return splitmix64(seed ^ fnv1a64(name));
}

double RandomStream::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double ScriptedUniforms::uniform() {
  if (next_ >= values_.size()) throw Error(ErrorCode::InvalidArgument, "scripted uniform stream exhausted");
  return values_[next_++];
}

}  // namespace effbound
