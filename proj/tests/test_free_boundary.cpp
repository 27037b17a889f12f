#include <doctest.h>

#include <cmath>
#include <random>

#include "bandctl/errors.hpp"
#include "bandctl/free_boundary.hpp"
#include "oracle_helpers.hpp"

using namespace bandctl;

// Anchor values for the canonical instance, computed by an unrelated
// fixed-step integrator plus spline root finding (accurate to ~1e-8).
namespace anchor {
constexpr double w0 = -4.1811053163;
constexpr double gamma = 1.9117486129;
constexpr double q = 0.7163868089;
constexpr double Q = 1.2568517731;
constexpr double S = 3.1071103213;
constexpr double x_peak = 2.3207635398;
} // namespace anchor

TEST_CASE("deficit area against a reference quadrature") {
    auto spec = oracle::canonical();
    double w0 = -2.0;
    double g2 = gamma_peak_touch(spec, w0);

    // peak-location consistency: at the touching rate the peak sits where
    // pi(-k) + h(x) equals the rate
    double x_peak_expect = g2 - spec.menu.evaluate(-spec.k).value; // h(x) = x
    auto touch = integrate(spec, w0, g2 + 1e-9, AfterPeakWBelow{w0});
    CHECK(touch.x_star == doctest::Approx(x_peak_expect).epsilon(2e-4));
    CHECK(touch.peak_value() == doctest::Approx(-spec.k).epsilon(1e-4));

    double gamma = g2 + 0.05;
    double got = deficit_area(spec, w0, gamma);

    // reference: fixed-step RK4 path, bisection for the first -k crossing,
    // Simpson for the area
    auto ref = oracle::rk4(oracle::rate_rhs(spec, gamma), w0, 8.0, 2e-6);
    std::size_t i = 0;
    while (ref.ws[i] < -spec.k) ++i;
    double lo = ref.xs[i - 1], hi = ref.xs[i];
    double q_ref = 0.5 * (lo + hi);
    auto w_of = [&](double x) { return oracle::path_value(ref, x); };
    for (int it = 0; it < 60; ++it) {
        q_ref = 0.5 * (lo + hi);
        (w_of(q_ref) < -spec.k ? lo : hi) = q_ref;
    }
    double ref_area =
        oracle::simpson([&](double x) { return w_of(x) + spec.k; }, 0.0, q_ref, 20000);

    CHECK(got == doctest::Approx(ref_area).epsilon(1e-6));
    CHECK(got < 0.0);
}

TEST_CASE("surplus area against a reference quadrature") {
    auto spec = oracle::canonical();
    double w0 = -2.0;
    double gamma = 1.6;

    double got = surplus_area(spec, w0, gamma);

    auto ref = oracle::rk4(oracle::rate_rhs(spec, gamma), w0, 10.0, 2e-6);
    auto w_of = [&](double x) { return oracle::path_value(ref, x); };
    // first and last crossings of l on the reference path
    double first = -1.0, last = -1.0;
    for (std::size_t i = 1; i < ref.xs.size(); ++i) {
        bool below = ref.ws[i - 1] < spec.l, now = ref.ws[i] < spec.l;
        if (below != now) {
            double lo = ref.xs[i - 1], hi = ref.xs[i], mid = 0.0;
            for (int it = 0; it < 60; ++it) {
                mid = 0.5 * (lo + hi);
                ((w_of(mid) < spec.l) == below ? lo : hi) = mid;
            }
            if (first < 0.0) first = mid;
            last = mid;
        }
    }
    REQUIRE(first > 0.0);
    REQUIRE(last > first);
    double ref_area = oracle::simpson([&](double x) { return w_of(x) - spec.l; },
                                      first, last, 20000);
    CHECK(got == doctest::Approx(ref_area).epsilon(1e-6));
    CHECK(got > 0.0);
}

TEST_CASE("surplus area: zero below the first crossing rate, infinite when rising") {
    auto spec = oracle::canonical();
    double w0 = -2.0;
    // just above the decreasing regime the peak stays under l
    double tiny = spec.menu.evaluate(w0).value + 1e-3;
    CHECK(surplus_area(spec, w0, tiny) == 0.0);
    // enormous rate: curve climbs past the cap
    CHECK(std::isinf(surplus_area(spec, w0, 60.0)));
}

TEST_CASE("areas are monotone in the rate and in the initial value") {
    auto spec = oracle::canonical();
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    int done = 0;
    while (done < 100) {
        double w0 = -3.5 + 2.0 * U(gen); // below -k
        double g2 = gamma_peak_touch(spec, w0);
        double ga = g2 + 0.02 + 0.5 * U(gen);
        double gb = ga + 0.05 + 0.5 * U(gen);

        double f2a = deficit_area(spec, w0, ga);
        double f2b = deficit_area(spec, w0, gb);
        CHECK(f2b > f2a);
        CHECK(f2a < 0.0);
        CHECK(f2b < 0.0);

        double f1a = surplus_area(spec, w0, ga);
        double f1b = surplus_area(spec, w0, gb);
        if (std::isfinite(f1a) && std::isfinite(f1b) && f1a > 0.0)
            CHECK(f1b > f1a);

        // deficit also grows with w0 at a fixed usable rate
        double w0b = w0 + 0.1 + 0.3 * U(gen);
        if (w0b < -spec.k - 0.05) {
            double g2b = gamma_peak_touch(spec, w0b);
            if (gb > g2b + 1e-6) {
                double f2c = deficit_area(spec, w0b, gb);
                CHECK(f2c > f2b);
            }
        }
        ++done;
    }
}

TEST_CASE("matched rates: defining equations hold and both fall with w0") {
    auto spec = oracle::canonical();
    SolveOptions opt;

    double prev_gs = 0.0, prev_gd = 0.0;
    bool have_prev = false;
    for (double w0 : {-5.0, -4.5, -4.0}) {
        double gs = gamma_surplus(spec, w0, opt);
        CHECK(surplus_area(spec, w0, gs) == doctest::Approx(spec.L).epsilon(1e-7));

        auto gd = gamma_deficit(spec, w0, opt);
        REQUIRE(gd.has_value());
        CHECK(deficit_area(spec, w0, *gd) == doctest::Approx(-spec.K).epsilon(1e-7));
        CHECK(*gd > gamma_peak_touch(spec, w0));

        if (have_prev) {
            // w0 grows along the loop, both matched rates must fall
            CHECK(gs < prev_gs);
            CHECK(*gd < prev_gd);
        }
        prev_gs = gs;
        prev_gd = *gd;
        have_prev = true;
    }

    // high w0: the deficit cannot reach -K, signalled rather than solved
    CHECK_FALSE(gamma_deficit(spec, -1.0, opt).has_value());
}

TEST_CASE("full solve matches the independent anchor") {
    auto spec = oracle::canonical();
    auto sol = solve(spec);

    CHECK(sol.w0_star == doctest::Approx(anchor::w0).epsilon(2e-6));
    CHECK(sol.gamma_star == doctest::Approx(anchor::gamma).epsilon(1e-6));
    CHECK(sol.q_star == doctest::Approx(anchor::q).epsilon(1e-5));
    CHECK(sol.Q_star == doctest::Approx(anchor::Q).epsilon(1e-5));
    CHECK(sol.S_star == doctest::Approx(anchor::S).epsilon(1e-5));
    CHECK(sol.x_star == doctest::Approx(anchor::x_peak).epsilon(1e-5));

    CHECK(0.0 < sol.q_star);
    CHECK(sol.q_star < sol.Q_star);
    CHECK(sol.Q_star < sol.S_star);
    CHECK(sol.x_star > sol.Q_star);
    CHECK(sol.x_star < sol.S_star);

    CHECK(std::abs(sol.r1) <= 1e-6);
    CHECK(std::abs(sol.r2) <= 1e-6);
    CHECK(std::abs(sol.r3) <= 1e-6);
    CHECK(std::abs(sol.r4) <= 1e-6);
    CHECK(std::abs(sol.r5) <= 1e-6);

    // curve boundary values straight from the dense representation
    CHECK(sol.curve.value(sol.q_star) == doctest::Approx(-spec.k).epsilon(1e-6));
    CHECK(sol.curve.value(sol.Q_star) == doctest::Approx(spec.l).epsilon(1e-6));
    CHECK(sol.curve.value(sol.S_star) == doctest::Approx(spec.l).epsilon(1e-6));
    CHECK(sol.curve.x_end() >= sol.S_star);
}

TEST_CASE("doubling every cost doubles the rate and keeps the thresholds") {
    auto base = oracle::canonical();
    auto sol1 = solve(base);

    ProblemSpec twice = base;
    twice.K *= 2.0;
    twice.k *= 2.0;
    twice.L *= 2.0;
    twice.l *= 2.0;
    twice.h = HoldingCost::linear(2.0);
    twice.menu = DriftMenu::finite_set({{-1.0, 2.0},
                                        {-0.5, 0.5},
                                        {0.0, 0.0},
                                        {0.5, 0.5},
                                        {1.0, 2.0}});
    auto sol2 = solve(twice);

    CHECK(sol2.gamma_star == doctest::Approx(2.0 * sol1.gamma_star).epsilon(1e-6));
    CHECK(sol2.q_star == doctest::Approx(sol1.q_star).epsilon(1e-6));
    CHECK(sol2.Q_star == doctest::Approx(sol1.Q_star).epsilon(1e-6));
    CHECK(sol2.S_star == doctest::Approx(sol1.S_star).epsilon(1e-6));
}

TEST_CASE("drift profile: decreasing to the peak, increasing after") {
    auto spec = oracle::canonical();
    auto sol = solve(spec);
    auto prof = mu_star_profile(spec, sol, 400);
    REQUIRE(prof.size() == 400);
    CHECK(prof.front().first == 0.0);
    CHECK(prof.back().first == doctest::Approx(sol.S_star).epsilon(1e-12));

    int segments = 1;
    for (std::size_t i = 1; i < prof.size(); ++i) {
        double x_prev = prof[i - 1].first, x_cur = prof[i].first;
        double m_prev = prof[i - 1].second, m_cur = prof[i].second;
        if (m_cur != m_prev) ++segments;
        if (x_cur <= sol.x_star) CHECK(m_cur <= m_prev + 1e-12);
        if (x_prev >= sol.x_star) CHECK(m_cur >= m_prev - 1e-12);
    }
    // five-rate menu, curve sweeps from below -1.5 up to ~1.32 and back to l
    CHECK(segments >= 4);
}

TEST_CASE("solve reports failure with a trace when no pairing exists") {
    // Unreachable deficit: a floor right under -k leaves no room to descend.
    auto spec = oracle::canonical();
    SolveOptions opt;
    opt.w0_floor = -0.8;
    CHECK_THROWS_AS(solve(spec, opt), SolveError);
    try {
        solve(spec, opt);
    } catch (const SolveError& e) {
        CHECK(std::string(e.what()).find("w0") != std::string::npos);
    }
}
