#include "bandctl/ode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "bandctl/errors.hpp"
#include "bandctl/roots.hpp"
#include "dopri5.hpp"

namespace bandctl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct RuleView {
    bool reach_x = false;
    bool needs_peak = false;
    double x_target = kInf;
    double level = kInf;
};

RuleView decode(const StoppingRule& stop) {
    RuleView v;
    if (const auto* r = std::get_if<ReachX>(&stop)) {
        if (!std::isfinite(r->x_cap) || r->x_cap <= 0.0)
            throw ConfigError("stopping rule: target x must be positive and finite");
        v.reach_x = true;
        v.x_target = r->x_cap;
    } else if (const auto* r = std::get_if<WBelow>(&stop)) {
        v.level = r->level;
    } else {
        v.needs_peak = true;
        v.level = std::get<AfterPeakWBelow>(stop).level;
    }
    return v;
}

} // namespace

std::size_t SolutionCurve::locate(double x) const {
    // Last segment whose start does not exceed x.
    std::size_t lo = 0, hi = segs_.size();
    while (hi - lo > 1) {
        std::size_t mid = lo + (hi - lo) / 2;
        if (segs_[mid].x0 <= x)
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

double SolutionCurve::value(double x) const {
    if (segs_.empty()) return nodes.front().w;
    if (x <= 0.0) return nodes.front().w;
    if (x >= x_end()) return nodes.back().w;
    const Segment& s = segs_[locate(x)];
    return s.eval(std::clamp((x - s.x0) / s.h, 0.0, 1.0));
}

double SolutionCurve::derivative(double x) const {
    if (segs_.empty()) return nodes.front().wp;
    if (x <= 0.0) return nodes.front().wp;
    if (x >= x_end()) return nodes.back().wp;
    const Segment& s = segs_[locate(x)];
    return s.deriv(std::clamp((x - s.x0) / s.h, 0.0, 1.0));
}

double SolutionCurve::peak_value() const {
    switch (shape) {
    case Shape::Decreasing:
        return nodes.front().w;
    case Shape::Increasing:
        return nodes.back().w;
    case Shape::Unimodal:
        return value(x_star);
    }
    return nodes.front().w; // unreachable
}

double SolutionCurve::integral(double a, double b) const {
    double sign = 1.0;
    if (a > b) {
        std::swap(a, b);
        sign = -1.0;
    }
    if (segs_.empty()) return 0.0;
    a = std::clamp(a, 0.0, x_end());
    b = std::clamp(b, 0.0, x_end());
    if (a == b) return 0.0;
    std::size_t ia = locate(a);
    std::size_t ib = locate(b);
    double total = 0.0;
    for (std::size_t i = ia; i <= ib && i < segs_.size(); ++i) {
        const Segment& s = segs_[i];
        double lo = std::max(a, s.x0);
        double hi = std::min(b, s.x0 + s.h);
        if (hi <= lo) continue;
        double t0 = std::clamp((lo - s.x0) / s.h, 0.0, 1.0);
        double t1 = std::clamp((hi - s.x0) / s.h, 0.0, 1.0);
        total += s.anti(t1) - s.anti(t0);
    }
    return sign * total;
}

std::vector<LevelCrossing> SolutionCurve::crossings(double level) const {
    std::vector<LevelCrossing> out;
    double w_start = nodes.front().w;
    double wp_start = nodes.front().wp;
    if (std::abs(w_start - level) <= 1e-12 * (1.0 + std::abs(level)) &&
        wp_start != 0.0)
        out.push_back({0.0, wp_start > 0.0 ? +1 : -1});

    constexpr int kSamples = 16;
    for (const Segment& s : segs_) {
        double prev = s.eval(0.0) - level;
        for (int i = 1; i <= kSamples; ++i) {
            double theta = static_cast<double>(i) / kSamples;
            double cur = s.eval(theta) - level;
            bool prev_nonneg = prev >= 0.0;
            bool cur_nonneg = cur >= 0.0;
            if (prev_nonneg != cur_nonneg) {
                auto fn = [&](double t) { return s.eval(t) - level; };
                double ta = static_cast<double>(i - 1) / kSamples;
                double tr = brent(fn, ta, theta, 1e-15);
                double x = s.x0 + tr * s.h;
                bool dup = !out.empty() &&
                           std::abs(x - out.back().x) <= 1e-11 * (1.0 + std::abs(x));
                if (!dup)
                    out.push_back({x, cur_nonneg ? +1 : -1});
            }
            prev = cur;
        }
    }
    return out;
}

SolutionCurve SolutionCurve::from_samples(std::vector<CurveNode> nodes_in,
                                          double w0, double gamma) {
    if (nodes_in.size() < 2)
        throw ConfigError("curve samples: need at least two nodes");
    if (std::abs(nodes_in.front().x) > 1e-9)
        throw ConfigError("curve samples: must start at x = 0");
    nodes_in.front().x = 0.0;
    for (std::size_t i = 0; i < nodes_in.size(); ++i) {
        const CurveNode& n = nodes_in[i];
        if (!std::isfinite(n.x) || !std::isfinite(n.w) || !std::isfinite(n.wp))
            throw ConfigError("curve samples: nodes must be finite");
        if (i > 0 && n.x <= nodes_in[i - 1].x)
            throw ConfigError("curve samples: x must be strictly increasing");
    }

    SolutionCurve c;
    c.w0 = w0;
    c.gamma = gamma;
    c.sampled = true;
    c.nodes = std::move(nodes_in);
    c.segs_.reserve(c.nodes.size() - 1);
    for (std::size_t i = 0; i + 1 < c.nodes.size(); ++i) {
        const CurveNode& a = c.nodes[i];
        const CurveNode& b = c.nodes[i + 1];
        double h = b.x - a.x;
        double dw = b.w - a.w;
        Segment s;
        s.x0 = a.x;
        s.h = h;
        s.c0 = a.w;
        s.c1 = h * a.wp;
        s.c2 = 3.0 * dw - h * (2.0 * a.wp + b.wp);
        s.c3 = -2.0 * dw + h * (a.wp + b.wp);
        s.c4 = 0.0;
        c.segs_.push_back(s);
    }

    c.termination = Termination::StoppedByRule;
    if (c.nodes.front().wp <= 0.0) {
        c.shape = Shape::Decreasing;
        c.x_star = 0.0;
        return c;
    }
    for (std::size_t i = 1; i < c.nodes.size(); ++i) {
        if (c.nodes[i].wp < 0.0) {
            const Segment& s = c.segs_[i - 1];
            auto dfun = [&](double t) { return s.deriv(t); };
            double tr = brent(dfun, 0.0, 1.0, 1e-14);
            c.shape = Shape::Unimodal;
            c.x_star = s.x0 + tr * s.h;
            return c;
        }
    }
    c.shape = Shape::Increasing;
    c.x_star = kInf;
    return c;
}

SolutionCurve integrate(const ProblemSpec& spec, double w0, double gamma,
                        const StoppingRule& stop, const IntegrateOptions& opt) {
    spec.validate();
    if (!std::isfinite(w0) || !std::isfinite(gamma))
        throw ConfigError("integrate: w0 and gamma must be finite");
    if (!(opt.tol > 0.0))
        throw ConfigError("integrate: tolerance must be positive");

    const RuleView rule = decode(stop);
    const double sig2 = spec.sigma2();
    const double two_over = 2.0 / sig2;
    auto rhs = [&](double x, double w) {
        return two_over * (gamma - spec.menu.evaluate(w).value - spec.h(x));
    };
    auto pi_of = [&](double w) { return spec.menu.evaluate(w).value; };

    double x_cap = opt.x_cap;
    if (rule.reach_x) {
        x_cap = rule.x_target;
    } else if (x_cap <= 0.0) {
        // Let the curve run until holding costs dominate every other rate in
        // play; past that point no shape question remains open.
        double target = std::abs(gamma) + std::abs(pi_of(0.0)) +
                        std::abs(pi_of(w0)) + 10.0 * (1.0 + sig2);
        if (std::isfinite(rule.level) && std::abs(rule.level) < 1e6)
            target += std::abs(pi_of(rule.level));
        double xh = 1.0;
        int tries = 0;
        while (spec.h(xh) < target) {
            xh *= 2.0;
            if (++tries > 200)
                throw ConfigError("holding cost must grow without bound");
        }
        x_cap = 2.0 * xh + 5.0;
    }
    const double w_guard =
        opt.w_guard > 0.0
            ? opt.w_guard
            : std::max(1e6, 1e3 * (std::abs(w0) + std::abs(gamma) + 1.0));

    SolutionCurve curve;
    curve.w0 = w0;
    curve.gamma = gamma;

    double x = 0.0;
    double w = w0;
    double f = rhs(x, w);
    curve.nodes.push_back({x, w, f});

    bool peaked = f <= 0.0;
    double x_star = peaked ? 0.0 : kInf;

    auto rule_met = [&](double xx, double ww) {
        if (rule.reach_x) return xx >= rule.x_target;
        if (rule.needs_peak && !peaked) return false;
        return ww < rule.level;
    };

    auto finish = [&](Termination term) {
        curve.termination = term;
        if (!peaked) {
            curve.shape = Shape::Increasing;
            curve.x_star = kInf;
        } else if (x_star == 0.0) {
            curve.shape = Shape::Decreasing;
            curve.x_star = 0.0;
        } else {
            curve.shape = Shape::Unimodal;
            curve.x_star = x_star;
        }
        return curve;
    };

    if (rule_met(x, w)) return finish(Termination::StoppedByRule);

    const double M = spec.menu.lipschitz_constant();
    const double h_max = sig2 / (4.0 * M + 1e-6);
    double h = std::min({h_max, 0.01 * (1.0 + std::abs(w0)) / (std::abs(f) + 1e-10),
                         x_cap});
    int rejects_in_row = 0;

    using detail::kA21, detail::kA31, detail::kA32, detail::kA41, detail::kA42,
        detail::kA43, detail::kA51, detail::kA52, detail::kA53, detail::kA54,
        detail::kA61, detail::kA62, detail::kA63, detail::kA64, detail::kA65,
        detail::kA71, detail::kA73, detail::kA74, detail::kA75, detail::kA76,
        detail::kC2, detail::kC3, detail::kC4, detail::kC5, detail::kE1,
        detail::kE3, detail::kE4, detail::kE5, detail::kE6, detail::kE7,
        detail::kD1, detail::kD3, detail::kD4, detail::kD5, detail::kD6,
        detail::kD7;

    for (int iter = 0; iter < opt.max_steps; ++iter) {
        bool lands_on_cap = false;
        double span = x_cap - x;
        if (h >= span) {
            h = span;
            lands_on_cap = true;
        }

        double k1 = f;
        double k2 = rhs(x + kC2 * h, w + h * (kA21 * k1));
        double k3 = rhs(x + kC3 * h, w + h * (kA31 * k1 + kA32 * k2));
        double k4 = rhs(x + kC4 * h, w + h * (kA41 * k1 + kA42 * k2 + kA43 * k3));
        double k5 = rhs(x + kC5 * h,
                        w + h * (kA51 * k1 + kA52 * k2 + kA53 * k3 + kA54 * k4));
        double k6 = rhs(x + h, w + h * (kA61 * k1 + kA62 * k2 + kA63 * k3 +
                                        kA64 * k4 + kA65 * k5));
        double w_new = w + h * (kA71 * k1 + kA73 * k3 + kA74 * k4 + kA75 * k5 +
                                kA76 * k6);
        double k7 = rhs(x + h, w_new);

        double err = h * (kE1 * k1 + kE3 * k3 + kE4 * k4 + kE5 * k5 + kE6 * k6 +
                          kE7 * k7);
        double scale = opt.tol * (1.0 + std::max(std::abs(w), std::abs(w_new)));
        double ratio = std::abs(err) / scale;

        if (!(ratio <= 1.0)) {
            ++rejects_in_row;
            if (rejects_in_row >= 2) {
                // Repeated rejection usually means a menu kink sits inside the
                // step; bisect toward it instead of trusting the error model.
                h *= 0.5;
            } else {
                double shrink = std::isfinite(ratio)
                                    ? std::clamp(0.9 * std::pow(ratio, -0.2), 0.1, 0.9)
                                    : 0.1;
                h *= shrink;
            }
            if (h < 1e-14 * (1.0 + std::abs(x))) {
                std::ostringstream msg;
                msg << "integrator step collapsed near x = " << x
                    << " (w = " << w << ", gamma = " << gamma << ")";
                throw StiffnessError(msg.str());
            }
            continue;
        }
        rejects_in_row = 0;

        double dy = w_new - w;
        double r3 = h * k1 - dy;
        double r4 = dy - h * k7 - r3;
        double r5 = h * (kD1 * k1 + kD3 * k3 + kD4 * k4 + kD5 * k5 + kD6 * k6 +
                         kD7 * k7);
        SolutionCurve::Segment s;
        s.x0 = x;
        s.h = h;
        s.c0 = w;
        s.c1 = dy + r3;
        s.c2 = r4 - r3 + r5;
        s.c3 = -r4 - 2.0 * r5;
        s.c4 = r5;
        curve.segs_.push_back(s);

        x = lands_on_cap ? x_cap : x + h;
        w = w_new;
        f = k7;
        curve.nodes.push_back({x, w, f});

        if (!peaked && f < 0.0) {
            peaked = true;
            const SolutionCurve::Segment& sg = curve.segs_.back();
            auto dfun = [&](double xx) {
                return rhs(xx, sg.eval((xx - sg.x0) / sg.h));
            };
            x_star = brent(dfun, sg.x0, sg.x0 + sg.h, 1e-13 * (1.0 + x));
        }

        if (rule_met(x, w)) return finish(Termination::StoppedByRule);

        if (!rule.reach_x) {
            if (!peaked && w >= w_guard) return finish(Termination::ReachedCap);
            if (x >= x_cap) {
                if (peaked) {
                    std::ostringstream msg;
                    msg << "curve peaked at x = " << x_star
                        << " but the stopping rule never fired by the cap x = "
                        << x_cap << " (w0 = " << w0 << ", gamma = " << gamma
                        << ")";
                    throw CapExceededError(msg.str());
                }
                return finish(Termination::ReachedCap);
            }
        } else if (lands_on_cap) {
            return finish(Termination::StoppedByRule);
        }

        double grow = ratio > 1e-30 ? 0.9 * std::pow(ratio, -0.2) : 5.0;
        h = std::min(h * std::clamp(grow, 0.2, 5.0), h_max);
    }
    throw StiffnessError("integrator exceeded its step budget before stopping");
}

Classification classify(const SolutionCurve& curve) {
    if (curve.nodes.empty())
        throw ClassificationError("cannot classify an empty curve");
    double wp0 = curve.nodes.front().wp;
    if (curve.nodes.size() == 1) {
        if (wp0 <= 0.0) return {Shape::Decreasing, 0.0};
        return {Shape::Increasing, kInf};
    }
    if (wp0 <= 0.0) return {Shape::Decreasing, 0.0};
    for (const CurveNode& n : curve.nodes)
        if (n.wp < 0.0) return {Shape::Unimodal, curve.x_star};
    return {Shape::Increasing, kInf};
}

std::vector<LevelCrossing> find_crossings(const SolutionCurve& curve,
                                          double level) {
    return curve.crossings(level);
}

} // namespace bandctl
