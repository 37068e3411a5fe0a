#pragma once

#include <vector>

namespace ctwa {

/// Exactly rounded floating-point sum (Shewchuk's non-overlapping partials).
///
/// value() is the correctly rounded sum of everything added, so the result does not depend on
/// the order of add()/merge() calls.
class ExactSum {
  public:
    void add(double x);
    void merge(const ExactSum& other);
    double value() const;

  private:
    std::vector<double> partials_;
    double special_ = 0.0;  // accumulates inf/nan so they propagate
};

}  // namespace ctwa
