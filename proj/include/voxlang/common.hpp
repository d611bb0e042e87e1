#pragma once
// Shared error types and the seeded RNG used by every sampling path.
//
// All randomness in the library flows from one root seed through named
// substreams (Rng::stream), so any component can be re-run in isolation
// and byte-identical outputs only require the same (seed, label) pair.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace voxlang {

struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnknownTokenError : std::runtime_error {
  explicit UnknownTokenError(const std::string& tok)
      : std::runtime_error("unknown token: " + tok), token(tok) {}
  std::string token;
};

// Parse failure with the byte offset of the offending token and the set of
// surface forms that would have been accepted there.
struct ParseError : std::runtime_error {
  ParseError(std::size_t at, std::vector<std::string> exp, const std::string& what_arg)
      : std::runtime_error(what_arg), offset(at), expected(std::move(exp)) {}
  std::size_t offset;
  std::vector<std::string> expected;
};

struct DivergedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RankDeficientError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RiccatiError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Referential resolution failed: `node` has no proposal above threshold.
struct NoCandidateError : std::runtime_error {
  explicit NoCandidateError(int n)
      : std::runtime_error("no candidate proposal for node " + std::to_string(n)), node(n) {}
  int node;
};

namespace detail {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xCBF29CE484222325ull) {
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return h;
}

}  // namespace detail

// Deterministic generator; cheap to copy. `stream` derives an independent
// child stream from a label (and optional index) without disturbing the
// parent's state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(detail::splitmix64(seed ^ detail::kGolden)), seed_(seed) {}

  Rng stream(std::string_view label, std::uint64_t index = 0) const {
    std::uint64_t h = detail::fnv1a(label);
    h = detail::splitmix64(h ^ seed_);
    h = detail::splitmix64(h + index * detail::kGolden);
    return Rng(h);
  }

  std::uint64_t bits() {
    state_ += detail::kGolden;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // [0,1)
  double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // inclusive bounds
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(bits() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  std::size_t index(std::size_t n) { return static_cast<std::size_t>(bits() % n); }

  double normal(double mean = 0.0, double sd = 1.0) {
    // Box-Muller, cosine branch only; u1 shifted away from zero.
    double u1 = (static_cast<double>(bits() >> 11) + 0.5) * 0x1.0p-53;
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sd * r * std::cos(6.283185307179586476925286766559 * u2);
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t state_;
  std::uint64_t seed_;
};

}  // namespace voxlang
