#pragma once

#include <string>
#include <vector>

#include "bandctl/band_policy.hpp"
#include "bandctl/free_boundary.hpp"
#include "bandctl/problem_spec.hpp"

namespace bandctl {

// Candidate value function built from a solved curve:
//   f(x) = integral of w_star over [0, x]          for x <= S_star,
//   f(x) = f(S_star) + l * (x - S_star)            for x >  S_star.
// Piecewise-exact under the curve's dense representation.
class ValueFunctionStar {
public:
    ValueFunctionStar(const FreeBoundarySolution& sol, double ell);

    double value(double x) const;
    double derivative(double x) const;        // w_star(x), or l past S_star
    double second_derivative(double x) const; // w_star'(x), or 0 past S_star

    // Global minimum of f over [0, infinity). The linear tail has positive
    // slope l, so the minimum is attained at 0 or at a zero of w_star.
    double lower_bound() const;

    double s_star() const { return s_star_; }

private:
    const FreeBoundarySolution* sol_;
    double ell_;
    double s_star_;
    double f_at_s_;
    double min_f_;
    std::vector<double> prefix_; // integral of w up to each segment start
};

struct CertifyOptions {
    double x_max = 0.0;  // 0 means 3 * S_star
    int n_grid = 2000;   // at least 1000 in practice
    double tol = 1e-6;
    int max_pair_samples = 1000; // pair inequalities subsample above this
};

struct Violation {
    double x;
    double y; // second point for pair inequalities, else equal to x
    double slack;
    std::string kind;
};

// Outcome of checking the optimality certificate for a given rate gamma:
// (i)  (sigma^2/2) f'' + pi(f') + h - gamma >= -tol on the grid,
// (ii) f(x) <= f(y) + K + k (y - x) for x < y,
// (iii) f(x) <= f(y) + L + l (x - y) for y < x,
// (iv) f bounded below.
// Any slack below -tol fails the certificate.
struct CertificationReport {
    bool passed = false;
    double min_drift_slack = 0.0;
    double min_up_slack = 0.0;
    double min_down_slack = 0.0;
    double f_lower_bound = 0.0;
    double w_min = 0.0; // smallest w_star over [0, S_star], for reference
    double x_max = 0.0;
    int n_grid = 0;
    std::vector<Violation> violations;
    std::string tail_note; // why x > x_max needs no grid: slack grows with h
};

CertificationReport check_lower_bound(const ProblemSpec& spec,
                                      const FreeBoundarySolution& sol,
                                      double gamma,
                                      const CertifyOptions& opt = {});

// Exhaustive threshold perturbation: evaluates the policy at every
// (q* + dq, Q* + dQ, S* + dS) over the given delta grid.
struct PerturbationRow {
    double dq, dQ, dS;
    double gamma;
};

std::vector<PerturbationRow> brute_force_local_opt(
    const ProblemSpec& spec, const FreeBoundarySolution& sol,
    const std::vector<double>& deltas, double tol = 1e-10);

} // namespace bandctl
