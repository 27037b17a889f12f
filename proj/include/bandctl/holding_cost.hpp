#pragma once

#include <functional>
#include <utility>
#include <vector>

namespace bandctl {

// State holding cost h: continuous, strictly increasing, h(0) = 0, unbounded.
// Families: linear a*x, power a*x^p, a sample table with piecewise-linear
// interpolation (extrapolated by the last segment slope), or an arbitrary
// callable for tests.
class HoldingCost {
public:
    enum class Family { Linear, Power, Table, Custom };

    static HoldingCost linear(double a);
    static HoldingCost power(double a, double p);
    static HoldingCost table(std::vector<std::pair<double, double>> points);
    static HoldingCost custom(std::function<double(double)> fn);

    double operator()(double x) const;

    Family family() const { return family_; }
    double coeff() const { return a_; }
    double exponent() const { return p_; }
    const std::vector<std::pair<double, double>>& points() const { return points_; }

private:
    HoldingCost() = default;

    Family family_ = Family::Linear;
    double a_ = 1.0;
    double p_ = 1.0;
    std::vector<std::pair<double, double>> points_;
    std::function<double(double)> fn_;
};

} // namespace bandctl
