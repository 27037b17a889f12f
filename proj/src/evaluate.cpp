#include "bandctl/evaluate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "bandctl/errors.hpp"
#include "dopri5.hpp"

namespace bandctl {

namespace {

// State layout: A, B, C basis values followed by their running integrals.
using State = std::array<double, 6>;

} // namespace

EvalResult evaluate_band_policy(const ProblemSpec& spec,
                                const BandPolicy& policy, double tol) {
    spec.validate();
    policy.validate();
    if (!(tol > 0.0))
        throw ConfigError("evaluate: tolerance must be positive");

    const double two_over = 2.0 / spec.sigma2();
    auto rhs = [&](double x, const State& y) {
        double mu = policy.drift(x);
        double cost = spec.menu.cost_at(mu);
        State d;
        d[0] = -two_over * mu * y[0];
        d[1] = two_over * (-mu * y[1] - cost - spec.h(x));
        d[2] = two_over * (1.0 - mu * y[2]);
        d[3] = y[0];
        d[4] = y[1];
        d[5] = y[2];
        return d;
    };

    const double M = spec.menu.lipschitz_constant();
    const double h_max = spec.sigma2() / (4.0 * M + 1e-6);

    EvalResult res;
    State y{1.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    double x = 0.0;
    res.nodes.push_back({x, y[0], y[1], y[2]});
    long steps_left = 2000000;

    using detail::kA21, detail::kA31, detail::kA32, detail::kA41, detail::kA42,
        detail::kA43, detail::kA51, detail::kA52, detail::kA53, detail::kA54,
        detail::kA61, detail::kA62, detail::kA63, detail::kA64, detail::kA65,
        detail::kA71, detail::kA73, detail::kA74, detail::kA75, detail::kA76,
        detail::kC2, detail::kC3, detail::kC4, detail::kC5, detail::kE1,
        detail::kE3, detail::kE4, detail::kE5, detail::kE6, detail::kE7;

    auto run_leg = [&](double x_to) {
        if (x_to <= x) return;
        State f = rhs(x, y);
        double h = std::min({h_max, x_to - x, 0.01});
        int rejects_in_row = 0;
        while (x < x_to) {
            if (--steps_left < 0)
                throw StiffnessError("evaluate: step budget exhausted");
            bool lands = false;
            if (h >= x_to - x) {
                h = x_to - x;
                lands = true;
            }

            State k1 = f, k2, k3, k4, k5, k6, k7, yt, y_new;
            for (int i = 0; i < 6; ++i) yt[i] = y[i] + h * kA21 * k1[i];
            k2 = rhs(x + kC2 * h, yt);
            for (int i = 0; i < 6; ++i)
                yt[i] = y[i] + h * (kA31 * k1[i] + kA32 * k2[i]);
            k3 = rhs(x + kC3 * h, yt);
            for (int i = 0; i < 6; ++i)
                yt[i] = y[i] + h * (kA41 * k1[i] + kA42 * k2[i] + kA43 * k3[i]);
            k4 = rhs(x + kC4 * h, yt);
            for (int i = 0; i < 6; ++i)
                yt[i] = y[i] + h * (kA51 * k1[i] + kA52 * k2[i] + kA53 * k3[i] +
                                    kA54 * k4[i]);
            k5 = rhs(x + kC5 * h, yt);
            for (int i = 0; i < 6; ++i)
                yt[i] = y[i] + h * (kA61 * k1[i] + kA62 * k2[i] + kA63 * k3[i] +
                                    kA64 * k4[i] + kA65 * k5[i]);
            k6 = rhs(x + h, yt);
            for (int i = 0; i < 6; ++i)
                y_new[i] = y[i] + h * (kA71 * k1[i] + kA73 * k3[i] + kA74 * k4[i] +
                                       kA75 * k5[i] + kA76 * k6[i]);
            k7 = rhs(x + h, y_new);

            double ratio = 0.0;
            for (int i = 0; i < 6; ++i) {
                double err = h * (kE1 * k1[i] + kE3 * k3[i] + kE4 * k4[i] +
                                  kE5 * k5[i] + kE6 * k6[i] + kE7 * k7[i]);
                double scale =
                    tol * (1.0 + std::max(std::abs(y[i]), std::abs(y_new[i])));
                ratio = std::max(ratio, std::abs(err) / scale);
            }

            if (!(ratio <= 1.0)) {
                ++rejects_in_row;
                if (rejects_in_row >= 2) {
                    h *= 0.5; // likely a drift-profile kink inside the step
                } else {
                    double shrink =
                        std::isfinite(ratio)
                            ? std::clamp(0.9 * std::pow(ratio, -0.2), 0.1, 0.9)
                            : 0.1;
                    h *= shrink;
                }
                if (h < 1e-14 * (1.0 + std::abs(x))) {
                    std::ostringstream msg;
                    msg << "evaluate: step collapsed near x = " << x;
                    throw StiffnessError(msg.str());
                }
                continue;
            }
            rejects_in_row = 0;

            x = lands ? x_to : x + h;
            y = y_new;
            f = k7;
            res.nodes.push_back({x, y[0], y[1], y[2]});

            double grow = ratio > 1e-30 ? 0.9 * std::pow(ratio, -0.2) : 5.0;
            h = std::min(h * std::clamp(grow, 0.2, 5.0), h_max);
        }
    };

    run_leg(policy.q);
    double ia1 = y[3], ib1 = y[4], ic1 = y[5];
    run_leg(policy.Q);
    double ia2 = y[3], ib2 = y[4], ic2 = y[5];
    run_leg(policy.S);
    double ia3 = y[3] - ia2, ib3 = y[4] - ib2, ic3 = y[5] - ic2;

    double m11 = ia1, m12 = ic1;
    double m21 = ia3, m22 = ic3;
    double b1 = -(spec.K + spec.k * policy.q) - ib1;
    double b2 = spec.L + spec.l * (policy.S - policy.Q) - ib3;

    double det = m11 * m22 - m12 * m21;
    double frob2 = m11 * m11 + m12 * m12 + m21 * m21 + m22 * m22;
    res.cond = std::abs(det) > 0.0 ? frob2 / std::abs(det)
                                   : std::numeric_limits<double>::infinity();
    if (!std::isfinite(res.cond) || res.cond > 1e12) {
        std::ostringstream msg;
        msg << "evaluate: boundary system is singular or ill-conditioned "
               "(condition estimate "
            << res.cond << ")";
        throw DegeneratePolicyError(msg.str());
    }

    res.w0 = (b1 * m22 - m12 * b2) / det;
    res.gamma = (m11 * b2 - m21 * b1) / det;
    res.r_up = res.w0 * m11 + ib1 + res.gamma * m12 + (spec.K + spec.k * policy.q);
    res.r_down = res.w0 * m21 + ib3 + res.gamma * m22 -
                 (spec.L + spec.l * (policy.S - policy.Q));
    return res;
}

} // namespace bandctl
