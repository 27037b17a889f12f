#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "bandctl/errors.hpp"

namespace bandctl {

struct RootResult {
    double x = 0.0;
    double fx = 0.0;
    int iterations = 0;
};

// Bisection for f(x) = 0 on [lo, hi]. The bracket must be sign-separating on
// entry and stays verified at every step; a lost bracket throws BracketError.
// Stops when |f| <= f_tol or the interval shrinks below x_tol.
template <typename F>
RootResult bisect(F&& f, double lo, double hi, double f_lo, double f_hi,
                  double x_tol, double f_tol, int max_iter = 200) {
    if (!(lo < hi)) throw BracketError("bisect: empty interval");
    if (f_lo == 0.0) return {lo, 0.0, 0};
    if (f_hi == 0.0) return {hi, 0.0, 0};
    if ((f_lo < 0.0) == (f_hi < 0.0))
        throw BracketError("bisect: endpoints do not straddle the root");
    RootResult r;
    for (int i = 0; i < max_iter; ++i) {
        double mid = 0.5 * (lo + hi);
        double fm = f(mid);
        r = {mid, fm, i + 1};
        if (std::abs(fm) <= f_tol || (hi - lo) <= x_tol) return r;
        if ((fm < 0.0) == (f_lo < 0.0)) {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
            f_hi = fm;
        }
    }
    return r;
}

template <typename F>
RootResult bisect(F&& f, double lo, double hi, double x_tol, double f_tol,
                  int max_iter = 200) {
    double f_lo = f(lo);
    double f_hi = f(hi);
    return bisect(f, lo, hi, f_lo, f_hi, x_tol, f_tol, max_iter);
}

// Brent's method on a sign-separating bracket [a, b]; converges to x_tol.
// Used where bisection alone would be slow (event refinement).
template <typename F>
double brent(F&& f, double a, double b, double x_tol, int max_iter = 200) {
    double fa = f(a);
    double fb = f(b);
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if ((fa < 0.0) == (fb < 0.0))
        throw BracketError("brent: endpoints do not straddle the root");
    double c = a, fc = fa;
    double d = b - a, e = d;
    for (int i = 0; i < max_iter; ++i) {
        if ((fb < 0.0) == (fc < 0.0)) {
            c = a; fc = fa; d = b - a; e = d;
        }
        if (std::abs(fc) < std::abs(fb)) {
            a = b; b = c; c = a;
            fa = fb; fb = fc; fc = fa;
        }
        double tol1 = 2.0 * 2.220446049250313e-16 * std::abs(b) + 0.5 * x_tol;
        double xm = 0.5 * (c - b);
        if (std::abs(xm) <= tol1 || fb == 0.0) return b;
        if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
            double s = fb / fa, p, q;
            if (a == c) {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                double qq = fa / fc, r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0.0) q = -q;
            p = std::abs(p);
            if (2.0 * p < std::min(3.0 * xm * q - std::abs(tol1 * q), std::abs(e * q))) {
                e = d; d = p / q;
            } else {
                d = xm; e = d;
            }
        } else {
            d = xm; e = d;
        }
        a = b; fa = fb;
        b += (std::abs(d) > tol1) ? d : (xm > 0.0 ? tol1 : -tol1);
        fb = f(b);
    }
    return b;
}

} // namespace bandctl
