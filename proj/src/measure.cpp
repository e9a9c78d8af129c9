#include "tailrisk/measure.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tailrisk/numeric.hpp"
#include "tailrisk/rng.hpp"

namespace tailrisk {

namespace {

constexpr double kMassTol = 1e-12;

void check_theta(const LossTable& loss, int theta) {
  if (theta < 0 || theta >= loss.theta_count()) {
    throw std::invalid_argument("theta index " + std::to_string(theta) + " out of range [0, " +
                                std::to_string(loss.theta_count()) + ")");
  }
}

void check_dims(const FiniteProbabilitySpace& space, const LossTable& loss) {
  if (loss.outcome_count() != space.outcome_count()) {
    throw std::invalid_argument("loss table has " + std::to_string(loss.outcome_count()) +
                                " outcomes but space has " +
                                std::to_string(space.outcome_count()));
  }
}

}  // namespace

FiniteProbabilitySpace::FiniteProbabilitySpace(std::vector<double> prob) : prob_(std::move(prob)) {
  if (prob_.empty()) throw std::invalid_argument("probability space needs at least one outcome");
  for (double p : prob_) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw std::invalid_argument("probability entries must be finite and non-negative");
    }
  }
  const double total = compensated_total(prob_);
  if (std::abs(total - 1.0) > kMassTol) {
    throw std::invalid_argument("probability mass sums to " + std::to_string(total) +
                                ", expected 1 within 1e-12");
  }
}

FiniteProbabilitySpace FiniteProbabilitySpace::uniform(int outcome_count) {
  if (outcome_count < 1) throw std::invalid_argument("uniform space needs outcome_count >= 1");
  return FiniteProbabilitySpace(
      std::vector<double>(static_cast<size_t>(outcome_count), 1.0 / outcome_count));
}

Event::Event(std::initializer_list<int> members) : Event(std::vector<int>(members)) {}

Event::Event(std::vector<int> members) : members_(std::move(members)) {
  std::sort(members_.begin(), members_.end());
  members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
  if (!members_.empty() && members_.front() < 0) {
    throw std::invalid_argument("event members must be non-negative outcome indices");
  }
}

Event Event::full(int outcome_count) {
  std::vector<int> all(static_cast<size_t>(outcome_count));
  for (int i = 0; i < outcome_count; ++i) all[static_cast<size_t>(i)] = i;
  return Event(std::move(all));
}

Event Event::complement(int outcome_count) const {
  std::vector<int> rest;
  rest.reserve(static_cast<size_t>(outcome_count) - members_.size());
  for (int i = 0; i < outcome_count; ++i) {
    if (!contains(i)) rest.push_back(i);
  }
  return Event(std::move(rest));
}

bool Event::contains(int outcome) const {
  return std::binary_search(members_.begin(), members_.end(), outcome);
}

void Event::check_within(int outcome_count) const {
  if (!members_.empty() && members_.back() >= outcome_count) {
    throw std::invalid_argument("event member " + std::to_string(members_.back()) +
                                " out of range for " + std::to_string(outcome_count) +
                                " outcomes");
  }
}

LossTable::LossTable(int theta_count, int outcome_count, std::vector<double> values)
    : theta_count_(theta_count), outcome_count_(outcome_count), values_(std::move(values)) {
  if (theta_count_ < 1 || outcome_count_ < 1) {
    throw std::invalid_argument("loss table needs at least one row and one column");
  }
  if (values_.size() != static_cast<size_t>(theta_count_) * static_cast<size_t>(outcome_count_)) {
    throw std::invalid_argument("loss table values do not match declared shape");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw std::invalid_argument("loss entries must be finite");
  }
}

LossTable LossTable::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw std::invalid_argument("loss table needs at least one row");
  std::vector<double> flat;
  flat.reserve(rows.size() * rows.front().size());
  for (const auto& row : rows) {
    if (row.size() != rows.front().size()) {
      throw std::invalid_argument("loss table rows have mismatched lengths");
    }
    flat.insert(flat.end(), row.begin(), row.end());
  }
  return LossTable(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()),
                   std::move(flat));
}

double LossTable::at(int theta, int outcome) const {
  check_theta(*this, theta);
  if (outcome < 0 || outcome >= outcome_count_) {
    throw std::invalid_argument("outcome index out of range");
  }
  return values_[static_cast<size_t>(theta) * static_cast<size_t>(outcome_count_) +
                 static_cast<size_t>(outcome)];
}

std::span<const double> LossTable::row(int theta) const {
  check_theta(*this, theta);
  return {values_.data() + static_cast<size_t>(theta) * static_cast<size_t>(outcome_count_),
          static_cast<size_t>(outcome_count_)};
}

double event_probability(const FiniteProbabilitySpace& space, const Event& a) {
  a.check_within(space.outcome_count());
  CompensatedSum mass;
  for (int omega : a.members()) mass.add(space.prob_of(omega));
  return mass.value();
}

ReweightedMeasure::ReweightedMeasure(const FiniteProbabilitySpace& space, Event d_event,
                                     double weight)
    : space_(&space), d_event_(std::move(d_event)), weight_(weight) {
  epsilon_ = event_probability(space, d_event_);
  if (!(epsilon_ > 0.0) || !(epsilon_ < 1.0)) {
    throw std::invalid_argument("reweighting needs Pr(D) strictly inside (0, 1), got " +
                                std::to_string(epsilon_));
  }
  if (!(weight_ > 0.0) || weight_ > epsilon_) {
    throw std::invalid_argument("weight must lie in (0, Pr(D)]");
  }
}

EpsilonSchedule EpsilonSchedule::geometric(double first, double ratio, int count) {
  if (!(first > 0.0)) throw std::invalid_argument("schedule needs a positive first entry");
  if (!(ratio > 0.0) || !(ratio < 1.0)) {
    throw std::invalid_argument("geometric schedule ratio must lie in (0, 1)");
  }
  if (count < 1) throw std::invalid_argument("schedule needs at least one entry");
  EpsilonSchedule s;
  s.values.resize(static_cast<size_t>(count));
  double v = first;
  for (int p = 0; p < count; ++p) {
    s.values[static_cast<size_t>(p)] = v;
    v *= ratio;
  }
  return s;
}

void EpsilonSchedule::check_for(double epsilon) const {
  if (values.empty()) throw std::invalid_argument("schedule is empty");
  if (values.front() > epsilon) {
    throw std::invalid_argument("schedule must start at or below Pr(D)");
  }
  for (size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] > 0.0)) throw std::invalid_argument("schedule entries must stay positive");
    if (i > 0 && !(values[i] < values[i - 1])) {
      throw std::invalid_argument("schedule must decrease strictly");
    }
  }
}

double measure_of(const ReweightedMeasure& m, const Event& a) {
  a.check_within(m.space().outcome_count());
  CompensatedSum in_d;
  CompensatedSum off_d;
  for (int omega : a.members()) {
    if (m.d_event().contains(omega)) {
      in_d.add(m.space().prob_of(omega));
    } else {
      off_d.add(m.space().prob_of(omega));
    }
  }
  const double eps = m.epsilon();
  return (m.weight() / eps) * in_d.value() + ((1.0 - m.weight()) / (1.0 - eps)) * off_d.value();
}

double risk(const FiniteProbabilitySpace& space, const LossTable& loss, int theta) {
  check_dims(space, loss);
  check_theta(loss, theta);
  return compensated_dot(loss.row(theta), space.prob());
}

double tail_risk(const FiniteProbabilitySpace& space, const LossTable& loss, int theta,
                 const Event& d_event) {
  check_dims(space, loss);
  check_theta(loss, theta);
  d_event.check_within(space.outcome_count());
  CompensatedSum acc;
  for (int omega : d_event.members()) {
    acc.add(loss.at(theta, omega) * space.prob_of(omega));
  }
  return acc.value();
}

double integrate_under(const ReweightedMeasure& m, std::span<const double> f) {
  const auto& space = m.space();
  if (f.size() != static_cast<size_t>(space.outcome_count())) {
    throw std::invalid_argument("integrand length does not match the space");
  }
  for (double v : f) {
    if (!std::isfinite(v)) throw std::invalid_argument("integrand must be finite everywhere");
  }
  CompensatedSum on_d;
  CompensatedSum off_d;
  for (int omega = 0; omega < space.outcome_count(); ++omega) {
    const double term = f[static_cast<size_t>(omega)] * space.prob_of(omega);
    if (m.d_event().contains(omega)) {
      on_d.add(term);
    } else {
      off_d.add(term);
    }
  }
  const double eps = m.epsilon();
  return (m.weight() / eps) * on_d.value() + ((1.0 - m.weight()) / (1.0 - eps)) * off_d.value();
}

std::vector<double> tail_limit_sweep(const FiniteProbabilitySpace& space, const LossTable& loss,
                                     int theta, const Event& d_event,
                                     const EpsilonSchedule& schedule) {
  check_dims(space, loss);
  check_theta(loss, theta);
  d_event.check_within(space.outcome_count());

  const double i_d = tail_risk(space, loss, theta, d_event);
  const double i_c = tail_risk(space, loss, theta, d_event.complement(space.outcome_count()));
  const double eps = event_probability(space, d_event);
  if (!(eps > 0.0) || !(eps < 1.0)) {
    throw std::invalid_argument("tail sweep needs Pr(D) strictly inside (0, 1)");
  }
  schedule.check_for(eps);

  // e_p = |int L dmu_p - I_C/(1-eps)| collapses algebraically to
  // eps_p * |I_D/eps - I_C/(1-eps)|; evaluating the factored form keeps the
  // successive ratios at eps_{p+1}/eps_p instead of drowning them in
  // cancellation once eps_p is tiny.
  const double contrast = std::abs(i_d / eps - i_c / (1.0 - eps));
  std::vector<double> errors;
  errors.reserve(schedule.values.size());
  for (double eps_p : schedule.values) errors.push_back(eps_p * contrast);
  return errors;
}

const char* to_string(ConvergenceKind kind) {
  switch (kind) {
    case ConvergenceKind::kLinear:
      return "linear";
    case ConvergenceKind::kSuperlinear:
      return "superlinear";
    case ConvergenceKind::kSublinear:
      return "sublinear";
    case ConvergenceKind::kInconclusive:
      return "inconclusive";
  }
  return "inconclusive";
}

ConvergenceVerdict classify_convergence(std::span<const double> errors) {
  if (errors.size() < 4) return {};
  for (double e : errors) {
    if (!(e > 0.0) || !std::isfinite(e)) return {};
  }

  std::vector<double> ratios;
  ratios.reserve(errors.size() - 1);
  for (size_t i = 0; i + 1 < errors.size(); ++i) ratios.push_back(errors[i + 1] / errors[i]);

  const auto [lo_it, hi_it] = std::minmax_element(ratios.begin(), ratios.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  const double mean = compensated_mean(ratios);

  if (mean > 0.0 && (hi - lo) / mean < 1e-6) {
    if (mean < 1.0) return {ConvergenceKind::kLinear, mean};
    return {};  // constant at or beyond 1 is not convergence
  }

  const bool decreasing = std::is_sorted(ratios.begin(), ratios.end(), std::greater<double>());
  if (decreasing && ratios.back() < 0.5 * ratios.front()) {
    return {ConvergenceKind::kSuperlinear, 0.0};
  }
  const bool increasing = std::is_sorted(ratios.begin(), ratios.end());
  if (increasing && ratios.back() >= 0.9 && ratios.back() < 1.0) {
    return {ConvergenceKind::kSublinear, 0.0};
  }
  return {};
}

double empirical_risk(const SampleSet& samples, const LossTable& loss, int theta) {
  check_theta(loss, theta);
  if (samples.outcomes.empty()) throw std::invalid_argument("empirical risk needs samples");
  // Aggregate into per-outcome counts first: the summation order is then
  // fixed by outcome index, making the result permutation-invariant
  // bit-for-bit.
  std::vector<std::int64_t> counts(static_cast<size_t>(loss.outcome_count()), 0);
  for (int omega : samples.outcomes) {
    if (omega < 0 || omega >= loss.outcome_count()) {
      throw std::invalid_argument("sample outcome out of range for the loss table");
    }
    ++counts[static_cast<size_t>(omega)];
  }
  CompensatedSum acc;
  for (int omega = 0; omega < loss.outcome_count(); ++omega) {
    if (counts[static_cast<size_t>(omega)] == 0) continue;
    acc.add(static_cast<double>(counts[static_cast<size_t>(omega)]) * loss.at(theta, omega));
  }
  return acc.value() / static_cast<double>(samples.outcomes.size());
}

SampleSet sample_iid(const FiniteProbabilitySpace& space, int count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("sample_iid needs count >= 1");
  RngStream stream = RngStream(seed).split("iid-samples");
  SampleSet out;
  out.seed = seed;
  out.outcomes.resize(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    out.outcomes[static_cast<size_t>(i)] =
        static_cast<int>(stream.pick_at(static_cast<std::uint64_t>(i), space.prob()));
  }
  return out;
}

}  // namespace tailrisk
