#pragma once

#include <span>
#include <vector>

namespace autoprompt {

// Exact floating-point accumulator: keeps the running sum as a list of
// non-overlapping partials (Shewchuk), and value() is the correctly rounded
// sum. The result depends only on the multiset of added values, never on
// the order they arrived in. Inputs must be finite.
class ExactSum {
 public:
  ExactSum() = default;

  void add(double x);
  double value() const;

  const std::vector<double>& partials() const { return partials_; }
  static ExactSum from_partials(std::span<const double> partials);

 private:
  std::vector<double> partials_;
};

}  // namespace autoprompt
