#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tailrisk {

/// Finite probability space (Omega, 2^Omega, Pr).  Outcomes are the indices
/// 0..n-1 of the mass vector; the sigma-algebra is implicit.
class FiniteProbabilitySpace {
 public:
  /// Validates on construction: entries >= 0, total mass 1 within 1e-12.
  explicit FiniteProbabilitySpace(std::vector<double> prob);

  [[nodiscard]] int outcome_count() const { return static_cast<int>(prob_.size()); }
  [[nodiscard]] const std::vector<double>& prob() const { return prob_; }
  [[nodiscard]] double prob_of(int outcome) const { return prob_.at(static_cast<size_t>(outcome)); }

  static FiniteProbabilitySpace uniform(int outcome_count);

 private:
  std::vector<double> prob_;
};

/// A subset of outcomes, kept as a sorted, deduplicated index list.
class Event {
 public:
  Event() = default;
  Event(std::initializer_list<int> members);
  explicit Event(std::vector<int> members);

  static Event full(int outcome_count);
  [[nodiscard]] Event complement(int outcome_count) const;

  [[nodiscard]] bool contains(int outcome) const;
  [[nodiscard]] const std::vector<int>& members() const { return members_; }
  [[nodiscard]] bool empty() const { return members_.empty(); }

  /// Throws if any member falls outside [0, outcome_count).
  void check_within(int outcome_count) const;

 private:
  std::vector<int> members_;
};

/// Loss values L(omega, theta), rows indexed by model parameter theta,
/// columns by outcome.  All entries must be finite.
class LossTable {
 public:
  LossTable(int theta_count, int outcome_count, std::vector<double> values);
  static LossTable from_rows(const std::vector<std::vector<double>>& rows);

  [[nodiscard]] int theta_count() const { return theta_count_; }
  [[nodiscard]] int outcome_count() const { return outcome_count_; }
  [[nodiscard]] double at(int theta, int outcome) const;
  [[nodiscard]] std::span<const double> row(int theta) const;

 private:
  int theta_count_ = 0;
  int outcome_count_ = 0;
  std::vector<double> values_;  // row-major
};

/// The reweighted family mu_p: pins mu_p(D) = eps_p while renormalizing the
/// complement, i.e. mu_p(A) = (eps_p/eps) Pr(A and D)
///                          + ((1-eps_p)/(1-eps)) Pr(A minus D)
/// with eps = Pr(D).  Holds a reference to the space; the space must outlive
/// the measure.
class ReweightedMeasure {
 public:
  /// Rejects eps = Pr(D) outside (0, 1) and weight outside (0, eps].
  ReweightedMeasure(const FiniteProbabilitySpace& space, Event d_event, double weight);

  [[nodiscard]] const FiniteProbabilitySpace& space() const { return *space_; }
  [[nodiscard]] const Event& d_event() const { return d_event_; }
  [[nodiscard]] double epsilon() const { return epsilon_; }  // Pr(D)
  [[nodiscard]] double weight() const { return weight_; }    // eps_p

 private:
  const FiniteProbabilitySpace* space_;
  Event d_event_;
  double epsilon_;
  double weight_;
};

/// Monotone weight sequence eps >= eps_1 > eps_2 > ... > 0.
struct EpsilonSchedule {
  std::vector<double> values;

  /// values[p] = first * ratio^p for p = 0..count-1, ratio in (0,1).
  static EpsilonSchedule geometric(double first, double ratio, int count);

  /// Checks positivity, strict decrease, and first entry <= epsilon.
  void check_for(double epsilon) const;
};

/// i.i.d. draws from a space, tagged with the seed that produced them.
struct SampleSet {
  std::vector<int> outcomes;
  std::uint64_t seed = 0;
};

// --- operations ------------------------------------------------------------

/// Pr(A) under the base measure, summed in canonical order.  This is the
/// value ReweightedMeasure uses for eps internally, so callers who want the
/// identity case weight = Pr(D) should obtain eps from here.
double event_probability(const FiniteProbabilitySpace& space, const Event& a);

/// mu_p(A) per the defining two-term formula.
double measure_of(const ReweightedMeasure& m, const Event& a);

/// R(theta) = sum_omega L(omega, theta) Pr(omega).
double risk(const FiniteProbabilitySpace& space, const LossTable& loss, int theta);

/// Contribution of D alone: sum_{omega in D} L(omega, theta) Pr(omega).
double tail_risk(const FiniteProbabilitySpace& space, const LossTable& loss, int theta,
                 const Event& d_event);

/// Integral of f (given by its per-outcome values) under mu_p, evaluated via
/// the two-term decomposition.
double integrate_under(const ReweightedMeasure& m, std::span<const double> f);

/// Errors e_p = |int L dmu_p - (1/(1-eps)) int_{complement} L dPr| for every
/// weight in the schedule.  Computed in the cancellation-free form
/// e_p = eps_p * |I_D/eps - I_C/(1-eps)| so that successive ratios reproduce
/// eps_{p+1}/eps_p without catastrophic rounding.
std::vector<double> tail_limit_sweep(const FiniteProbabilitySpace& space, const LossTable& loss,
                                     int theta, const Event& d_event,
                                     const EpsilonSchedule& schedule);

enum class ConvergenceKind { kLinear, kSuperlinear, kSublinear, kInconclusive };

const char* to_string(ConvergenceKind kind);

struct ConvergenceVerdict {
  ConvergenceKind kind = ConvergenceKind::kInconclusive;
  double rate = 0.0;  // meaningful only for kLinear
};

/// Empirical ratio test on an error sequence.  Requires at least 4 positive
/// entries (else inconclusive).  With ratios r_i = e_{i+1}/e_i:
///   - relative spread of the r_i below 1e-6 and mean in (0,1) -> linear(mean)
///   - strictly decreasing r_i ending below half the first      -> superlinear
///   - strictly increasing r_i ending in [0.9, 1)               -> sublinear
///   - anything else                                            -> inconclusive
ConvergenceVerdict classify_convergence(std::span<const double> errors);

/// Sample-average risk (1/l) sum_i L(omega_i, theta).  Aggregates by outcome
/// count before summing, so any permutation of the samples produces the
/// bit-identical result.
double empirical_risk(const SampleSet& samples, const LossTable& loss, int theta);

/// Deterministic i.i.d. sampler; the draw at position i depends only on
/// (seed, i), never on how many draws preceded it.
SampleSet sample_iid(const FiniteProbabilitySpace& space, int count, std::uint64_t seed);

}  // namespace tailrisk
