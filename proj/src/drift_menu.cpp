#include "bandctl/drift_menu.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bandctl/errors.hpp"

namespace bandctl {

namespace {

constexpr double kTieTol = 1e-12;

// Golden-section minimization of g on [a, b]; keeps shrinking until the
// bracket is tight relative to its magnitude.
template <typename G>
double golden_min(G&& g, double a, double b) {
    constexpr double r = 0.6180339887498949;
    double x1 = b - r * (b - a);
    double x2 = a + r * (b - a);
    double f1 = g(x1);
    double f2 = g(x2);
    for (int i = 0; i < 200 && (b - a) > 1e-13 * (1.0 + std::abs(a) + std::abs(b));
         ++i) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = g(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = g(x2);
        }
    }
    return f1 < f2 ? x1 : x2;
}

} // namespace

DriftMenu DriftMenu::finite_set(std::vector<DriftEntry> entries) {
    if (entries.empty())
        throw ConfigError("drift menu: need at least one rate");
    for (const auto& e : entries)
        if (!std::isfinite(e.mu) || !std::isfinite(e.cost))
            throw ConfigError("drift menu: rates and costs must be finite");
    std::sort(entries.begin(), entries.end(),
              [](const DriftEntry& a, const DriftEntry& b) { return a.mu < b.mu; });
    for (std::size_t i = 1; i < entries.size(); ++i)
        if (entries[i].mu == entries[i - 1].mu)
            throw ConfigError("drift menu: duplicate rate");
    DriftMenu m;
    m.finite_ = true;
    m.mu_min_ = entries.front().mu;
    m.mu_max_ = entries.back().mu;
    m.entries_ = std::move(entries);
    return m;
}

DriftMenu DriftMenu::interval(double lo, double hi,
                              std::function<double(double)> cost,
                              int grid_points) {
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
        throw ConfigError("drift menu: interval needs finite lo < hi");
    if (!cost)
        throw ConfigError("drift menu: interval needs a cost function");
    if (grid_points < 3)
        throw ConfigError("drift menu: interval grid needs at least 3 points");
    DriftMenu m;
    m.finite_ = false;
    m.lo_ = lo;
    m.hi_ = hi;
    m.cost_ = std::move(cost);
    m.grid_points_ = grid_points;
    m.mu_min_ = lo;
    m.mu_max_ = hi;
    return m;
}

DriftChoice DriftMenu::evaluate(double w) const {
    if (finite_) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& e : entries_) {
            double v = e.mu * w + e.cost;
            if (v < best) best = v;
        }
        for (const auto& e : entries_) // entries sorted: first hit is smallest mu
            if (e.mu * w + e.cost <= best + kTieTol)
                return {best, e.mu};
        throw ClassificationError("drift menu: minimum lost"); // unreachable
    }

    auto g = [&](double mu) {
        double c = cost_(mu);
        if (!std::isfinite(c))
            throw ConfigError("drift menu: cost function returned a non-finite value");
        return mu * w + c;
    };
    const int n = grid_points_;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        double v = g(lo_ + (hi_ - lo_) * i / (n - 1));
        if (v < best) best = v;
    }
    int pick = 0;
    for (int i = 0; i < n; ++i) {
        if (g(lo_ + (hi_ - lo_) * i / (n - 1)) <= best + kTieTol) {
            pick = i;
            break;
        }
    }
    double a = lo_ + (hi_ - lo_) * std::max(pick - 1, 0) / (n - 1);
    double b = lo_ + (hi_ - lo_) * std::min(pick + 1, n - 1) / (n - 1);
    double mu = golden_min(g, a, b);
    double v = g(mu);
    double grid_mu = lo_ + (hi_ - lo_) * pick / (n - 1);
    double grid_v = g(grid_mu);
    if (grid_v < v) {
        mu = grid_mu;
        v = grid_v;
    }
    return {v, mu};
}

double DriftMenu::lipschitz_constant() const {
    return std::max(std::abs(mu_min_), std::abs(mu_max_));
}

double DriftMenu::cost_at(double mu) const {
    if (finite_) {
        for (const auto& e : entries_)
            if (std::abs(e.mu - mu) <= kTieTol) return e.cost;
        throw ConfigError("drift rate is not on the menu");
    }
    if (mu < lo_ - kTieTol || mu > hi_ + kTieTol)
        throw ConfigError("drift rate is outside the menu interval");
    return cost_(std::clamp(mu, lo_, hi_));
}

} // namespace bandctl
