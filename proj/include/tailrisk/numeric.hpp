#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace tailrisk {

/// Neumaier-compensated accumulator.  All library reductions run through
/// this in canonical ascending-index order, which is what makes results
/// reproducible to the documented tolerances.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }

  [[nodiscard]] double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double compensated_total(std::span<const double> xs) {
  CompensatedSum acc;
  for (double x : xs) acc.add(x);
  return acc.value();
}

inline double compensated_mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return compensated_total(xs) / static_cast<double>(xs.size());
}

/// Weighted sum sum_i w[i]*x[i] in ascending-index order.
inline double compensated_dot(std::span<const double> w, std::span<const double> x) {
  CompensatedSum acc;
  const std::size_t n = w.size() < x.size() ? w.size() : x.size();
  for (std::size_t i = 0; i < n; ++i) acc.add(w[i] * x[i]);
  return acc.value();
}

}  // namespace tailrisk
