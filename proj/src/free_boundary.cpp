#include "bandctl/free_boundary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "bandctl/errors.hpp"
#include "bandctl/roots.hpp"

namespace bandctl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kHuge = std::numeric_limits<double>::max();

IntegrateOptions integ_opt(const SolveOptions& opt) {
    IntegrateOptions io;
    io.tol = opt.integrator_tol;
    return io;
}

double pi_of(const ProblemSpec& spec, double w) {
    return spec.menu.evaluate(w).value;
}

// Curve integrated just past its peak; enough to see the peak value and every
// crossing on the rising side.
SolutionCurve past_peak(const ProblemSpec& spec, double w0, double gamma,
                        const SolveOptions& opt) {
    return integrate(spec, w0, gamma, AfterPeakWBelow{kHuge}, integ_opt(opt));
}

} // namespace

double surplus_area(const ProblemSpec& spec, double w0, double gamma,
                    const SolveOptions& opt) {
    if (!(w0 < spec.l))
        throw ConfigError("surplus area: w0 must lie below the level l");
    if (gamma <= pi_of(spec, w0)) return 0.0; // curve starts falling
    SolutionCurve c =
        integrate(spec, w0, gamma, AfterPeakWBelow{spec.l}, integ_opt(opt));
    if (c.shape == Shape::Increasing) return kInf;
    if (c.peak_value() <= spec.l) return 0.0;
    // Bracket both crossings against the refined peak so that excursions
    // barely clearing the level cannot slip between dense-output samples.
    auto gap = [&](double x) { return c.value(x) - spec.l; };
    double Q = brent(gap, 0.0, c.x_star, 1e-13 * (1.0 + c.x_star));
    double S = brent(gap, c.x_star, c.x_end(), 1e-13 * (1.0 + c.x_end()));
    return c.integral(Q, S) - spec.l * (S - Q);
}

double deficit_area(const ProblemSpec& spec, double w0, double gamma,
                    const SolveOptions& opt) {
    if (!(w0 < -spec.k))
        throw ConfigError("deficit area: w0 must lie below -k");
    SolutionCurve c = past_peak(spec, w0, gamma, opt);
    auto gap = [&](double x) { return c.value(x) + spec.k; };
    double q;
    if (c.shape == Shape::Increasing) {
        if (c.nodes.back().w <= -spec.k)
            throw ConfigError("deficit area: curve never rises through -k at this rate");
        q = brent(gap, 0.0, c.x_end(), 1e-13 * (1.0 + c.x_end()));
    } else {
        if (c.peak_value() <= -spec.k)
            throw ConfigError("deficit area: curve never rises through -k at this rate");
        q = brent(gap, 0.0, c.x_star, 1e-13 * (1.0 + c.x_star));
    }
    return c.integral(0.0, q) + spec.k * q;
}

double gamma_peak_touch(const ProblemSpec& spec, double w0,
                        const SolveOptions& opt) {
    if (!(w0 < -spec.k))
        throw ConfigError("peak-touch rate: w0 must lie below -k");
    const double base = pi_of(spec, w0);
    auto peak_gap = [&](double gamma) {
        return past_peak(spec, w0, gamma, opt).peak_value() + spec.k;
    };

    double gap = 0.25 * (-spec.k - w0);
    double lo = base + gap;
    double f_lo = peak_gap(lo);
    int tries = 0;
    while (f_lo >= 0.0) {
        gap *= 0.5;
        lo = base + gap;
        f_lo = peak_gap(lo);
        if (++tries > opt.max_expansions)
            throw BracketError("peak-touch rate: no rate keeps the peak below -k");
    }
    double step = std::max(1.0, 0.5 * std::abs(lo));
    double hi = lo + step;
    double f_hi = peak_gap(hi);
    tries = 0;
    while (f_hi < 0.0) {
        step *= 2.0;
        hi = lo + step;
        f_hi = peak_gap(hi);
        if (++tries > opt.max_expansions)
            throw BracketError("peak-touch rate: peak never reaches -k");
    }

    RootResult r = bisect(peak_gap, lo, hi, f_lo, f_hi,
                          opt.root_tol * (1.0 + std::abs(hi)), opt.root_tol);
    double g2 = r.x;

    // At the touching rate the peak sits on -k, so the rate must equal the
    // Hamiltonian there plus the holding cost at the peak location.
    SolutionCurve c = past_peak(spec, w0, g2, opt);
    if (c.shape == Shape::Unimodal) {
        double implied = pi_of(spec, -spec.k) + spec.h(c.x_star);
        if (std::abs(implied - g2) > 1e-5 * (1.0 + std::abs(g2))) {
            std::ostringstream msg;
            msg << "peak-touch rate: consistency check failed (rate " << g2
                << " vs implied " << implied << ")";
            throw SolveError(msg.str());
        }
    }
    return g2;
}

double gamma_surplus(const ProblemSpec& spec, double w0,
                     const SolveOptions& opt) {
    if (!(w0 < spec.l))
        throw ConfigError("surplus rate: w0 must lie below the level l");
    const double base = pi_of(spec, w0);
    auto excess = [&](double gamma) {
        return surplus_area(spec, w0, gamma, opt) - spec.L;
    };

    double gap = 0.25 * (spec.l - w0);
    double lo = base + gap;
    double f_lo = excess(lo);
    int tries = 0;
    while (f_lo >= 0.0) {
        gap *= 0.5;
        lo = base + gap;
        f_lo = excess(lo);
        if (++tries > opt.max_expansions)
            throw BracketError("surplus rate: no rate keeps the surplus under L");
    }
    double step = std::max(1.0, 0.5 * std::abs(lo));
    double hi = lo + step;
    double f_hi = excess(hi);
    tries = 0;
    while (f_hi < 0.0) {
        step *= 2.0;
        hi = lo + step;
        f_hi = excess(hi);
        if (++tries > opt.max_expansions)
            throw BracketError("surplus rate: surplus never reaches L");
    }

    RootResult r = bisect(excess, lo, hi, f_lo, f_hi,
                          opt.root_tol * (1.0 + std::abs(hi)),
                          opt.root_tol * (1.0 + spec.L));
    return r.x;
}

std::optional<double> gamma_deficit(const ProblemSpec& spec, double w0,
                                    const SolveOptions& opt) {
    double g2 = gamma_peak_touch(spec, w0, opt);
    double delta = std::max(10.0 * opt.root_tol, 1e-7 * (1.0 + std::abs(g2)));
    auto shortfall = [&](double gamma) {
        return deficit_area(spec, w0, gamma, opt) + spec.K;
    };

    double lo = g2 + delta;
    double f_lo = shortfall(lo);
    if (f_lo >= 0.0) return std::nullopt; // deficit never reaches -K from here

    double step = delta;
    double hi = lo;
    double f_hi = f_lo;
    int tries = 0;
    while (f_hi < 0.0) {
        step *= 2.0;
        hi = lo + step;
        f_hi = shortfall(hi);
        if (++tries > opt.max_expansions)
            throw BracketError("deficit rate: deficit never shrinks back to -K");
    }

    RootResult r = bisect(shortfall, lo, hi, f_lo, f_hi,
                          opt.root_tol * (1.0 + std::abs(hi)),
                          opt.root_tol * (1.0 + spec.K));
    return r.x;
}

FreeBoundarySolution solve(const ProblemSpec& spec, const SolveOptions& opt) {
    spec.validate();
    const double floor =
        opt.w0_floor < 0.0 ? opt.w0_floor : -1e6 * (spec.k + spec.l + 1.0);
    std::ostringstream trace;

    struct Rates {
        double gs = 0.0;
        double gd = 0.0;
        bool has_deficit = false;
    };
    auto rates_at = [&](double w) {
        Rates r;
        auto gd = gamma_deficit(spec, w, opt);
        if (gd) {
            r.has_deficit = true;
            r.gd = *gd;
            r.gs = gamma_surplus(spec, w, opt);
            trace << "  w0 = " << w << ": surplus rate " << r.gs
                  << ", deficit rate " << r.gd << ", gap " << (r.gd - r.gs)
                  << "\n";
        } else {
            trace << "  w0 = " << w << ": deficit rate does not exist\n";
        }
        return r;
    };
    auto fail = [&](const std::string& what) -> SolveError {
        return SolveError(what + "\nbracketing trace:\n" + trace.str());
    };

    // Phase 1: find the threshold below which the deficit condition becomes
    // solvable, probing geometrically away from -k.
    double w_exist = 0.0, w_noexist = 0.0;
    Rates at_exist;
    bool found_exist = false, found_noexist = false;
    double off = 0.5;
    for (int j = 0; j <= opt.max_expansions && !found_exist; ++j) {
        double w = -spec.k - off;
        if (w < floor)
            throw fail("w0 search hit the floor before the deficit condition "
                       "became solvable");
        Rates r = rates_at(w);
        if (r.has_deficit) {
            w_exist = w;
            at_exist = r;
            found_exist = true;
        } else {
            w_noexist = w;
            found_noexist = true;
            off *= 2.0;
        }
    }
    if (!found_exist)
        throw fail("no w0 in range admits the deficit condition");
    if (!found_noexist) {
        // First probe already worked; walk back toward -k for the other side.
        double up = 0.25;
        for (int j = 0; j <= opt.max_expansions; ++j) {
            double w = -spec.k - up;
            Rates r = rates_at(w);
            if (!r.has_deficit) {
                w_noexist = w;
                found_noexist = true;
                break;
            }
            w_exist = w;
            at_exist = r;
            up *= 0.5;
        }
        if (!found_noexist)
            throw fail("deficit condition stays solvable arbitrarily close to "
                       "-k; cannot bracket its threshold");
    }

    // Phase 2: tighten toward the threshold until the deficit rate drops
    // below the surplus rate, which gives the upper end of the w0 bracket.
    double w_hi = 0.0;
    Rates at_hi;
    bool have_hi = false;
    if (at_exist.gd - at_exist.gs < 0.0) {
        w_hi = w_exist;
        at_hi = at_exist;
        have_hi = true;
    }
    for (int j = 0; j < 200 && !have_hi; ++j) {
        if (std::abs(w_noexist - w_exist) <=
            1e3 * opt.root_tol * (1.0 + std::abs(w_exist)))
            throw fail("no w0 near the deficit threshold has its deficit rate "
                       "below its surplus rate");
        double mid = 0.5 * (w_exist + w_noexist);
        Rates r = rates_at(mid);
        if (r.has_deficit) {
            w_exist = mid;
            at_exist = r;
            if (r.gd - r.gs < 0.0) {
                w_hi = mid;
                at_hi = r;
                have_hi = true;
            }
        } else {
            w_noexist = mid;
        }
    }
    if (!have_hi)
        throw fail("could not locate a w0 with negative rate gap");

    // Phase 3: march down until the gap turns non-negative, giving the lower
    // end of the bracket.
    double w_lo = 0.0;
    Rates at_lo;
    bool have_lo = false;
    off = std::max(0.5, -spec.k - w_hi);
    for (int j = 0; j <= opt.max_expansions; ++j) {
        double w = -spec.k - off * 2.0;
        off *= 2.0;
        if (w >= w_hi) continue;
        if (w < floor)
            throw fail("w0 search hit the floor before the rate gap changed "
                       "sign");
        Rates r = rates_at(w);
        if (!r.has_deficit)
            throw fail("deficit condition unexpectedly unsolvable below the "
                       "threshold");
        if (r.gd - r.gs >= 0.0) {
            w_lo = w;
            at_lo = r;
            have_lo = true;
            break;
        }
    }
    if (!have_lo)
        throw fail("rate gap never changed sign above the w0 floor");
    (void)at_lo;

    // Phase 4: bisect the gap to find where the two rates agree.
    double best_w = w_hi;
    Rates best = at_hi;
    for (int j = 0; j < 200; ++j) {
        double mid = 0.5 * (w_lo + w_hi);
        Rates r = rates_at(mid);
        if (!r.has_deficit)
            throw fail("deficit condition lost inside the w0 bracket");
        double d = r.gd - r.gs;
        if (std::abs(d) < std::abs(best.gd - best.gs)) {
            best_w = mid;
            best = r;
        }
        bool done_f = std::abs(d) <= 10.0 * opt.root_tol * (1.0 + std::abs(r.gs));
        bool done_x = (w_hi - w_lo) <= opt.root_tol * (1.0 + std::abs(mid));
        if (done_f || done_x) break;
        if (d < 0.0)
            w_hi = mid;
        else
            w_lo = mid;
    }

    FreeBoundarySolution sol;
    sol.w0_star = best_w;
    sol.gamma_star = 0.5 * (best.gs + best.gd);

    // Assemble the optimal curve, extended a little past its last crossing so
    // nearby perturbed policies can reuse it.
    IntegrateOptions io = integ_opt(opt);
    SolutionCurve probe = integrate(spec, sol.w0_star, sol.gamma_star,
                                    AfterPeakWBelow{spec.l}, io);
    if (probe.shape != Shape::Unimodal)
        throw fail("optimal curve is not unimodal; solve is inconsistent");
    double x_extend = 1.25 * probe.x_end() + 0.5;
    sol.curve = integrate(spec, sol.w0_star, sol.gamma_star, ReachX{x_extend}, io);

    bool have_q = false;
    for (const auto& lc : sol.curve.crossings(-spec.k)) {
        if (lc.direction > 0) {
            sol.q_star = lc.x;
            have_q = true;
            break;
        }
    }
    if (!have_q) throw fail("optimal curve never rises through -k");

    bool have_Q = false, have_S = false;
    for (const auto& lc : sol.curve.crossings(spec.l)) {
        if (!have_Q && lc.direction > 0) {
            sol.Q_star = lc.x;
            have_Q = true;
        } else if (have_Q && !have_S && lc.direction < 0) {
            sol.S_star = lc.x;
            have_S = true;
        }
    }
    if (!have_Q || !have_S)
        throw fail("optimal curve does not cross the level l twice");
    sol.x_star = sol.curve.x_star;

    if (!(0.0 < sol.q_star && sol.q_star < sol.Q_star &&
          sol.Q_star < sol.S_star && sol.Q_star < sol.x_star &&
          sol.x_star < sol.S_star)) {
        std::ostringstream msg;
        msg << "threshold ordering violated: q = " << sol.q_star
            << ", Q = " << sol.Q_star << ", S = " << sol.S_star
            << ", peak = " << sol.x_star;
        throw fail(msg.str());
    }

    sol.r1 = sol.curve.integral(0.0, sol.q_star) + spec.k * sol.q_star + spec.K;
    sol.r2 = sol.curve.integral(sol.Q_star, sol.S_star) -
             spec.l * (sol.S_star - sol.Q_star) - spec.L;
    sol.r3 = sol.curve.value(sol.q_star) + spec.k;
    sol.r4 = sol.curve.value(sol.Q_star) - spec.l;
    sol.r5 = sol.curve.value(sol.S_star) - spec.l;
    double worst = std::max({std::abs(sol.r1), std::abs(sol.r2),
                             std::abs(sol.r3), std::abs(sol.r4),
                             std::abs(sol.r5)});
    if (worst > opt.residual_target) {
        std::ostringstream msg;
        msg << "boundary residuals exceed the target " << opt.residual_target
            << ": r1 = " << sol.r1 << ", r2 = " << sol.r2 << ", r3 = " << sol.r3
            << ", r4 = " << sol.r4 << ", r5 = " << sol.r5;
        throw fail(msg.str());
    }

    sol.mu_profile = mu_star_profile(spec, sol, 512);
    return sol;
}

std::vector<std::pair<double, double>> mu_star_profile(
    const ProblemSpec& spec, const FreeBoundarySolution& sol, int n) {
    if (n < 2) throw ConfigError("drift profile: need at least two samples");
    std::vector<std::pair<double, double>> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double x = sol.S_star * i / (n - 1);
        out.emplace_back(x, spec.menu.evaluate(sol.curve.value(x)).mu);
    }
    return out;
}

} // namespace bandctl
