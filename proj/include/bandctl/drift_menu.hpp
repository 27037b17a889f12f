#pragma once

#include <functional>
#include <vector>

namespace bandctl {

// Outcome of minimizing mu*w + c(mu) over the admissible drift set:
// the minimum itself and the rate attaining it.
struct DriftChoice {
    double value; // min over mu of mu*w + c(mu)
    double mu;    // smallest minimizer
};

struct DriftEntry {
    double mu;
    double cost;
};

// Admissible drift rates with their running costs. Either a finite set of
// (mu, cost) pairs or a closed interval [lo, hi] with a cost function.
//
// evaluate(w) minimizes mu*w + c(mu) over the set. Minimizers within an
// absolute tolerance of 1e-12 of the minimum count as tied, and ties resolve
// to the smallest mu, which makes the selected rate a deterministic,
// monotone-decreasing function of w.
class DriftMenu {
public:
    static DriftMenu finite_set(std::vector<DriftEntry> entries);
    static DriftMenu interval(double lo, double hi,
                              std::function<double(double)> cost,
                              int grid_points = 1025);

    DriftChoice evaluate(double w) const;

    // Slope bound of the minimum as a function of w: max(|mu_lo|, |mu_hi|).
    double lipschitz_constant() const;

    double mu_min() const { return mu_min_; }
    double mu_max() const { return mu_max_; }
    bool is_finite() const { return finite_; }
    const std::vector<DriftEntry>& entries() const { return entries_; }
    double cost_at(double mu) const;

private:
    DriftMenu() = default;

    bool finite_ = true;
    std::vector<DriftEntry> entries_; // finite case, sorted by mu
    double lo_ = 0.0, hi_ = 0.0;      // interval case
    std::function<double(double)> cost_;
    int grid_points_ = 1025;
    double mu_min_ = 0.0, mu_max_ = 0.0;
};

} // namespace bandctl
