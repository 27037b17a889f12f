#include "bandctl/holding_cost.hpp"

#include <algorithm>
#include <cmath>

#include "bandctl/errors.hpp"

namespace bandctl {

HoldingCost HoldingCost::linear(double a) {
    if (!std::isfinite(a) || a <= 0.0)
        throw ConfigError("holding cost: linear slope must be positive");
    HoldingCost h;
    h.family_ = Family::Linear;
    h.a_ = a;
    return h;
}

HoldingCost HoldingCost::power(double a, double p) {
    if (!std::isfinite(a) || a <= 0.0)
        throw ConfigError("holding cost: power coefficient must be positive");
    if (!std::isfinite(p) || p <= 0.0)
        throw ConfigError("holding cost: power exponent must be positive");
    HoldingCost h;
    h.family_ = Family::Power;
    h.a_ = a;
    h.p_ = p;
    return h;
}

HoldingCost HoldingCost::table(std::vector<std::pair<double, double>> points) {
    if (points.size() < 2)
        throw ConfigError("holding cost: table needs at least two points");
    for (const auto& [x, v] : points)
        if (!std::isfinite(x) || !std::isfinite(v) || x < 0.0)
            throw ConfigError("holding cost: table entries must be finite with x >= 0");
    for (std::size_t i = 1; i < points.size(); ++i) {
        if (points[i].first <= points[i - 1].first)
            throw ConfigError("holding cost: table x values must be strictly increasing");
        if (points[i].second <= points[i - 1].second)
            throw ConfigError("holding cost: table values must be strictly increasing");
    }
    HoldingCost h;
    h.family_ = Family::Table;
    h.points_ = std::move(points);
    return h;
}

HoldingCost HoldingCost::custom(std::function<double(double)> fn) {
    if (!fn)
        throw ConfigError("holding cost: custom function must not be null");
    HoldingCost h;
    h.family_ = Family::Custom;
    h.fn_ = std::move(fn);
    return h;
}

double HoldingCost::operator()(double x) const {
    switch (family_) {
    case Family::Linear:
        return a_ * x;
    case Family::Power:
        return a_ * std::pow(x, p_);
    case Family::Table: {
        // Piecewise linear interpolation; outside the table the nearest
        // segment's slope extends the curve so monotone growth continues.
        const auto& p = points_;
        if (x <= p.front().first) {
            double s = (p[1].second - p[0].second) / (p[1].first - p[0].first);
            return p.front().second + s * (x - p.front().first);
        }
        if (x >= p.back().first) {
            std::size_t n = p.size();
            double s = (p[n - 1].second - p[n - 2].second) /
                       (p[n - 1].first - p[n - 2].first);
            return p.back().second + s * (x - p.back().first);
        }
        auto it = std::upper_bound(
            p.begin(), p.end(), x,
            [](double v, const std::pair<double, double>& q) { return v < q.first; });
        std::size_t i = static_cast<std::size_t>(it - p.begin());
        double t = (x - p[i - 1].first) / (p[i].first - p[i - 1].first);
        return p[i - 1].second + t * (p[i].second - p[i - 1].second);
    }
    case Family::Custom:
        return fn_(x);
    }
    throw ConfigError("holding cost: unknown family"); // unreachable
}

} // namespace bandctl
