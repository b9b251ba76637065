#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace creditquote {

/// Counter-based 64-bit generator.
///
/// Output i of a stream is a pure function of (key, i), so a stream is
/// reproducible bit-for-bit on every platform. Independent sub-streams are
/// derived with fork(); forking does not advance the parent.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer on the closed range [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  /// Standard normal through the inverse CDF.
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  /// Index j drawn with probability weights[j] / sum(weights).
  std::size_t categorical(std::span<const double> weights);

  Rng fork(std::uint64_t stream) const;

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  Rng(std::uint64_t key, std::uint64_t counter, int) : key_(key), counter_(counter) {}
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace creditquote
