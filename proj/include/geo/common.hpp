#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace geo {

enum class Errc {
  syntax_error,
  undefined_point,
  arity_error,
  duplicate_point,
  missing_tag,
  multiple_tags,
  invariant_violation,
  infeasible_configuration,
  degenerate_configuration,
  unknown_point,
  coincides_with_existing,
  not_linearizable,
  inconsistent_system,
  turn_limit_exceeded,
  not_solved,
  exhausted_retries,
  timeout,
  config_error,
  io_error,
};

const char* errc_name(Errc c);

/// Error carries a machine-readable code plus, for parse errors, the byte
/// offset into the source text.
class Error : public std::runtime_error {
 public:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  Error(Errc code, std::string message, std::size_t position = npos)
      : std::runtime_error(std::move(message)), code_(code), position_(position) {}

  Errc code() const { return code_; }
  std::size_t position() const { return position_; }

 private:
  Errc code_;
  std::size_t position_;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 operator/(double s) const { return {x / s, y / s}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  double norm2() const { return x * x + y * y; }
  Vec2 perp() const { return {-y, x}; }
  Vec2 normalized() const {
    double n = norm();
    return n > 0 ? Vec2{x / n, y / n} : Vec2{0, 0};
  }
};

inline double dist(Vec2 a, Vec2 b) { return (a - b).norm(); }

/// Portable splitmix64 generator. std::mt19937_64 plus the standard
/// distributions are implementation-defined; seeds must reproduce bit-for-bit
/// everywhere, so all sampling goes through this.
struct Rng {
  std::uint64_t state = 0x9e3779b97f4a7c15ULL;

  explicit Rng(std::uint64_t seed = 0) : state(seed + 0x9e3779b97f4a7c15ULL) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double u01() { return double(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

  std::uint64_t below(std::uint64_t n) { return n ? next() % n : 0; }
};

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  Rng r(a ^ (b * 0x9e3779b97f4a7c15ULL + 0x7f4a7c159e3779b9ULL));
  return r.next();
}

std::string format_double(double v);

}  // namespace geo
