#include <doctest.h>

#include <cmath>
#include <random>

#include "bandctl/errors.hpp"
#include "bandctl/ode.hpp"
#include "oracle_helpers.hpp"

using namespace bandctl;

namespace {

// Single rate mu = 1 at zero cost, linear holding, sigma^2 = 2. The rate
// equation becomes w' = 1 - w - x, solved by w(x) = 2 - x - 2 e^{-x}.
ProblemSpec linear_instance() {
    ProblemSpec s;
    s.sigma = std::sqrt(2.0);
    s.K = 1.0;
    s.k = 0.5;
    s.L = 1.0;
    s.l = 0.5;
    s.h = HoldingCost::linear(1.0);
    s.menu = DriftMenu::finite_set({{1.0, 0.0}});
    return s;
}

double lin_w(double x) { return 2.0 - x - 2.0 * std::exp(-x); }
double lin_wp(double x) { return -1.0 + 2.0 * std::exp(-x); }

} // namespace

TEST_CASE("integration reproduces the closed-form linear solution") {
    auto spec = linear_instance();
    auto curve = integrate(spec, 0.0, 1.0, ReachX{3.0});

    CHECK(curve.x_end() == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(curve.termination == Termination::StoppedByRule);

    for (int i = 0; i <= 300; ++i) {
        double x = 3.0 * i / 300.0;
        CHECK(curve.value(x) == doctest::Approx(lin_w(x)).epsilon(1e-8));
    }
    for (double x : {0.1, 0.5, 1.3, 2.2, 2.9})
        CHECK(curve.derivative(x) == doctest::Approx(lin_wp(x)).epsilon(1e-7));

    // every stored node satisfies the rate equation
    for (const auto& n : curve.nodes) {
        double resid = 0.5 * spec.sigma2() * n.wp + spec.menu.evaluate(n.w).value +
                       spec.h(n.x) - 1.0;
        CHECK(std::abs(resid) <= 1e-12);
    }

    // exact antiderivative of the dense representation vs the closed form
    double exact = 2.0 * 3.0 - 0.5 * 9.0 + 2.0 * std::exp(-3.0) - 2.0;
    CHECK(curve.integral(0.0, 3.0) == doctest::Approx(exact).epsilon(1e-9));
    double partial = 2.0 * 1.2 - 0.5 * 1.44 + 2.0 * std::exp(-1.2) - 2.0;
    CHECK(curve.integral(0.0, 1.2) == doctest::Approx(partial).epsilon(1e-9));
}

TEST_CASE("classification and peak of the linear instance") {
    auto spec = linear_instance();
    auto curve = integrate(spec, 0.0, 1.0, ReachX{3.0});

    CHECK(curve.shape == Shape::Unimodal);
    CHECK(curve.x_star == doctest::Approx(std::log(2.0)).epsilon(1e-9));
    CHECK(curve.peak_value() == doctest::Approx(1.0 - std::log(2.0)).epsilon(1e-9));

    auto cls = classify(curve);
    CHECK(cls.shape == Shape::Unimodal);
    CHECK(cls.x_star == curve.x_star);
}

TEST_CASE("crossings: boundary start and interior roots") {
    auto spec = linear_instance();
    auto curve = integrate(spec, 0.0, 1.0, ReachX{3.0});

    // w(0) = 0 with w'(0) = 1 counts as an upward crossing at the origin.
    auto zero_cross = find_crossings(curve, 0.0);
    REQUIRE(zero_cross.size() == 2);
    CHECK(zero_cross[0].x == 0.0);
    CHECK(zero_cross[0].direction == 1);
    CHECK(zero_cross[1].direction == -1);
    // root of 2 - x - 2 e^{-x} by reference bisection
    double lo = 1.0, hi = 2.5;
    for (int i = 0; i < 80; ++i) {
        double mid = 0.5 * (lo + hi);
        (lin_w(mid) > 0 ? lo : hi) = mid;
    }
    CHECK(zero_cross[1].x == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-9));

    auto quarter = find_crossings(curve, 0.25);
    REQUIRE(quarter.size() == 2);
    CHECK(quarter[0].direction == 1);
    CHECK(quarter[1].direction == -1);
    CHECK(lin_w(quarter[0].x) == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(lin_w(quarter[1].x) == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(quarter[0].x < curve.x_star);
    CHECK(quarter[1].x > curve.x_star);
}

TEST_CASE("stopping rules") {
    auto spec = linear_instance();

    SUBCASE("WBelow fires immediately when already under the level") {
        auto curve = integrate(spec, 0.0, 1.0, WBelow{0.5});
        CHECK(curve.nodes.size() == 1);
        CHECK(curve.x_end() == 0.0);
        CHECK(curve.termination == Termination::StoppedByRule);
    }

    SUBCASE("AfterPeakWBelow waits for the peak") {
        auto curve = integrate(spec, 0.0, 1.0, AfterPeakWBelow{0.1});
        CHECK(curve.x_end() > std::log(2.0));
        CHECK(curve.nodes.back().w < 0.1);
        CHECK(curve.termination == Termination::StoppedByRule);
        // the level is crossed downward inside the curve
        auto cr = find_crossings(curve, 0.1);
        bool has_down = false;
        for (auto& c : cr) has_down |= (c.direction == -1);
        CHECK(has_down);
    }

    SUBCASE("ReachX lands exactly on the cap") {
        auto curve = integrate(spec, 0.0, 1.0, ReachX{1.7});
        CHECK(curve.x_end() == doctest::Approx(1.7).epsilon(1e-14));
    }
}

TEST_CASE("curves rise with the rate and with the initial value") {
    auto spec = oracle::canonical();
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int t = 0; t < 100; ++t) {
        double w0 = -3.0 + 3.0 * U(gen);
        double base = spec.menu.evaluate(w0).value;
        double g1 = base + 0.2 + 2.0 * U(gen);
        double g2 = g1 + 0.1 + U(gen);
        auto c1 = integrate(spec, w0, g1, ReachX{1.5});
        auto c2 = integrate(spec, w0, g2, ReachX{1.5});
        for (double x : {0.3, 0.9, 1.5})
            CHECK(c2.value(x) > c1.value(x));

        double w0b = w0 + 0.05 + U(gen);
        auto c3 = integrate(spec, w0b, g1, ReachX{1.5});
        for (double x : {0.0, 0.3, 0.9, 1.5})
            CHECK(c3.value(x) > c1.value(x));
    }
}

TEST_CASE("every curve takes exactly one of the three shapes") {
    auto spec = oracle::canonical();
    std::mt19937_64 gen(23);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    int seen_dec = 0, seen_uni = 0, seen_inc = 0;
    for (int t = 0; t < 100; ++t) {
        double w0 = -3.0 + 4.0 * U(gen);
        double base = spec.menu.evaluate(w0).value;
        double gamma = base - 1.0 + 4.0 * U(gen);
        IntegrateOptions opt;
        // Cap chosen so the slowest quasi-static descent (low gamma) still
        // reaches the stopping level, while keeping increasing cases cheap.
        opt.x_cap = 12.0;
        auto curve = integrate(spec, w0, gamma, AfterPeakWBelow{w0 - 5.0}, opt);

        double wp0 = (2.0 / spec.sigma2()) * (gamma - base);
        if (curve.shape == Shape::Decreasing) {
            ++seen_dec;
            CHECK(wp0 <= 0.0);
            CHECK(curve.x_star == 0.0);
            for (const auto& n : curve.nodes) CHECK(n.wp <= 1e-12);
        } else if (curve.shape == Shape::Unimodal) {
            ++seen_uni;
            CHECK(wp0 > 0.0);
            CHECK(curve.x_star > 0.0);
            CHECK(curve.x_star < curve.x_end());
            // derivative changes sign exactly once across nodes
            int flips = 0;
            for (std::size_t i = 1; i < curve.nodes.size(); ++i)
                if ((curve.nodes[i].wp < 0.0) != (curve.nodes[i - 1].wp < 0.0)) ++flips;
            CHECK(flips == 1);
        } else {
            ++seen_inc;
            CHECK(wp0 > 0.0);
            CHECK(curve.termination == Termination::ReachedCap);
            CHECK(std::isinf(curve.x_star));
            for (const auto& n : curve.nodes) CHECK(n.wp > 0.0);
        }
    }
    CHECK(seen_dec > 0);
    CHECK(seen_uni > 0);
    CHECK(seen_inc > 0);
}

TEST_CASE("cap handling: provisional increase returns, blocked descent throws") {
    auto spec = oracle::canonical();

    // Rising fast at a generous rate: the cap is reached while still
    // climbing, reported as a provisional increasing curve.
    IntegrateOptions small_cap;
    small_cap.x_cap = 2.0;
    auto up = integrate(spec, 0.0, 50.0, AfterPeakWBelow{-1.0}, small_cap);
    CHECK(up.shape == Shape::Increasing);
    CHECK(up.termination == Termination::ReachedCap);

    // Unimodal curve whose requested stop level is unreachably low: the cap
    // cuts the descent short, which is an error.
    IntegrateOptions tight;
    tight.x_cap = 2.5;
    CHECK_THROWS_AS(
        integrate(spec, -2.0, spec.menu.evaluate(-2.0).value + 0.8,
                  AfterPeakWBelow{-1e9}, tight),
        CapExceededError);
}

TEST_CASE("integration against the reference path on the canonical instance") {
    auto spec = oracle::canonical();
    double w0 = -2.0, gamma = 1.3;
    auto ref = oracle::rk4(oracle::rate_rhs(spec, gamma), w0, 2.5, 1e-5);
    auto curve = integrate(spec, w0, gamma, ReachX{2.5});
    for (double x : {0.2, 0.7, 1.1, 1.9, 2.5})
        CHECK(curve.value(x) == doctest::Approx(oracle::path_value(ref, x)).epsilon(1e-7));
}

TEST_CASE("curves rebuilt from samples track the original") {
    auto spec = linear_instance();
    std::vector<CurveNode> nodes;
    for (int i = 0; i <= 3000; ++i) {
        double x = 3.0 * i / 3000.0;
        nodes.push_back({x, lin_w(x), lin_wp(x)});
    }
    auto curve = SolutionCurve::from_samples(nodes, 0.0, 1.0);
    CHECK(curve.shape == Shape::Unimodal);
    CHECK(curve.x_star == doctest::Approx(std::log(2.0)).epsilon(1e-9));
    for (double x : {0.05, 0.4, 1.0, 1.77, 2.93})
        CHECK(curve.value(x) == doctest::Approx(lin_w(x)).epsilon(1e-10));
    double exact = 2.0 * 3.0 - 0.5 * 9.0 + 2.0 * std::exp(-3.0) - 2.0;
    CHECK(curve.integral(0.0, 3.0) == doctest::Approx(exact).epsilon(1e-10));
    auto cr = find_crossings(curve, 0.25);
    REQUIRE(cr.size() == 2);
    CHECK(lin_w(cr[0].x) == doctest::Approx(0.25).epsilon(1e-9));
}
