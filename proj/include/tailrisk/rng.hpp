#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string_view>

namespace tailrisk {

/// Counter-based pseudo-random stream built on the SplitMix64 finalizer.
///
/// A stream is a pure function of (key, index): draw i of stream k is
/// mix(k + (i+1)*GAMMA), so any draw can be addressed directly and replayed
/// without consuming the ones before it.  Child streams are derived with
/// split(), which hashes a tag into a fresh key; parent and child never
/// share draws.  This is the determinism contract: identical seed and
/// identical split path give bit-identical draws on every platform, and
/// concurrent consumers are safe as long as each owns its own stream.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : key_(mix(seed ^ kSeedDomain)) {}

  /// Child stream for a numeric tag.
  [[nodiscard]] RngStream split(std::uint64_t tag) const {
    return RngStream(FromKey{}, mix(key_ ^ mix(tag * kGamma + kSplitDomain)));
  }

  /// Child stream for a named purpose ("env", "agent-hedge", ...).
  [[nodiscard]] RngStream split(std::string_view label) const {
    return split(fnv1a(label));
  }

  /// Draw addressed by absolute index; does not advance the stream.
  [[nodiscard]] std::uint64_t at(std::uint64_t index) const {
    return mix(key_ + (index + 1) * kGamma);
  }

  std::uint64_t next_u64() { return at(counter_++); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return to_unit(next_u64()); }

  /// Uniform in [0, 1) at an absolute index (stream not advanced).
  [[nodiscard]] double uniform_at(std::uint64_t index) const {
    return to_unit(at(index));
  }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_int: n must be positive");
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

  /// Categorical draw from a probability vector via inverse CDF.
  std::size_t pick(std::span<const double> pmf) { return pick_from(uniform(), pmf); }

  /// Categorical draw using the uniform at an absolute index.
  [[nodiscard]] std::size_t pick_at(std::uint64_t index, std::span<const double> pmf) const {
    return pick_from(uniform_at(index), pmf);
  }

  [[nodiscard]] std::uint64_t key() const { return key_; }
  [[nodiscard]] std::uint64_t counter() const { return counter_; }

  /// Inverse-CDF lookup: smallest i with cumsum(pmf)[i] > u.  Trailing
  /// round-off is absorbed by clamping to the last positive entry.
  static std::size_t pick_from(double u, std::span<const double> pmf) {
    if (pmf.empty()) throw std::invalid_argument("pick: empty distribution");
    double acc = 0.0;
    std::size_t last_positive = 0;
    bool seen = false;
    for (std::size_t i = 0; i < pmf.size(); ++i) {
      acc += pmf[i];
      if (pmf[i] > 0.0) {
        last_positive = i;
        seen = true;
      }
      if (u < acc && pmf[i] > 0.0) return i;
    }
    if (!seen) throw std::invalid_argument("pick: distribution has no mass");
    return last_positive;
  }

 private:
  struct FromKey {};
  RngStream(FromKey, std::uint64_t key) : key_(key) {}

  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kSeedDomain = 0xD1B54A32D192ED03ULL;
  static constexpr std::uint64_t kSplitDomain = 0x8CB92BA72F3D8DD7ULL;

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }

  static constexpr std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001B3ULL;
    }
    return h;
  }

  static double to_unit(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace tailrisk
