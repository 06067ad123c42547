#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include <boost/random/normal_distribution.hpp>

namespace csaes {

/// Per-trial random engine. Every trial owns exactly one.
using Rng = std::mt19937_64;

/// FNV-1a, used to turn config ids into stream ids that are stable across
/// platforms and standard library versions.
constexpr std::uint64_t stable_hash(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Independent stream for (master seed, id, id, ...). The ids are fed to
/// std::seed_seq as 32-bit halves so distinct tuples give distinct states.
inline Rng make_stream(std::uint64_t master, std::initializer_list<std::uint64_t> ids = {}) {
  std::vector<std::uint32_t> words;
  words.reserve(2 * (ids.size() + 1));
  auto push = [&](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(master);
  for (auto id : ids) push(id);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

/// Standard normal variates (ziggurat).
class NormalSampler {
 public:
  double operator()(Rng& rng) { return dist_(rng); }

  void fill(std::span<double> out, Rng& rng) {
    for (double& v : out) v = dist_(rng);
  }

 private:
  boost::random::normal_distribution<double> dist_{0.0, 1.0};
};

}  // namespace csaes
