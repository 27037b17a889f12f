#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "bandctl/ode.hpp"
#include "bandctl/problem_spec.hpp"

namespace bandctl {

struct SolveOptions {
    double root_tol = 1e-9;        // bisection targets for rates and w0
    double integrator_tol = 1e-10; // per-step error target
    double residual_target = 1e-6; // boundary-condition residual bound
    double w0_floor = 0.0;         // 0 means -1e6 * (k + l + 1)
    int max_expansions = 60;       // geometric bracket growth limit
};

// Result of the free-boundary solve. The policy it encodes: adjust up to
// q_star when the level hits 0, adjust down to Q_star when it hits S_star,
// and run drift rate mu(w_star(x)) in between.
struct FreeBoundarySolution {
    double w0_star = 0.0;
    double gamma_star = 0.0; // optimal long-run average cost
    double q_star = 0.0;
    double Q_star = 0.0;
    double S_star = 0.0;
    double x_star = 0.0; // peak of w_star, lies inside (Q_star, S_star)

    // Boundary-condition residuals, all bounded by the residual target:
    // r1: integral of (w+k) over [0, q] plus K
    // r2: integral of (w-l) over [Q, S] minus L
    // r3: w(q) + k,   r4: w(Q) - l,   r5: w(S) - l
    double r1 = 0.0, r2 = 0.0, r3 = 0.0, r4 = 0.0, r5 = 0.0;

    // w_star; extends somewhat past S_star so nearby perturbed policies can
    // reuse the same drift profile.
    SolutionCurve curve;

    // mu(w_star(x)) sampled on a uniform grid over [0, S_star].
    std::vector<std::pair<double, double>> mu_profile;
};

// Area of w above the level l between its first and last crossing:
// integral of (w - l)^+ dx. Zero when the peak stays below l, +infinity when
// the curve is still rising at the cap. Requires w0 < l.
double surplus_area(const ProblemSpec& spec, double w0, double gamma,
                    const SolveOptions& opt = {});

// Signed area integral of (w + k) from 0 to the first upward crossing of -k.
// Requires w0 < -k and gamma large enough that the crossing exists
// (gamma above gamma_peak_touch).
double deficit_area(const ProblemSpec& spec, double w0, double gamma,
                    const SolveOptions& opt = {});

// The rate at which the curve's peak exactly touches -k. For larger rates the
// curve crosses -k; for smaller ones it stays below. Requires w0 < -k.
double gamma_peak_touch(const ProblemSpec& spec, double w0,
                        const SolveOptions& opt = {});

// The rate at which surplus_area equals L. Requires w0 < l.
double gamma_surplus(const ProblemSpec& spec, double w0,
                     const SolveOptions& opt = {});

// The rate at which deficit_area equals -K, or nullopt when w0 is not low
// enough for the deficit to reach -K (caller should decrease w0).
std::optional<double> gamma_deficit(const ProblemSpec& spec, double w0,
                                    const SolveOptions& opt = {});

// Full solve: finds w0_star where gamma_surplus and gamma_deficit agree,
// assembles the thresholds, and checks residuals and ordering. Throws
// SolveError with a bracketing trace when no root exists in range.
FreeBoundarySolution solve(const ProblemSpec& spec, const SolveOptions& opt = {});

// mu(w_star(x)) on a uniform n-point grid over [0, S_star].
std::vector<std::pair<double, double>> mu_star_profile(
    const ProblemSpec& spec, const FreeBoundarySolution& sol, int n);

} // namespace bandctl
