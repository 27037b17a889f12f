#pragma once

#include <functional>

#include "bandctl/free_boundary.hpp"
#include "bandctl/problem_spec.hpp"

namespace bandctl {

// A two-sided adjustment band with a state-dependent drift rate: adjust up to
// q when the level reaches 0, adjust down to Q when it reaches S, and run
// drift(x) in between. Requires 0 < q <= Q < S.
struct BandPolicy {
    double q = 0.0;
    double Q = 0.0;
    double S = 0.0;
    std::function<double(double)> drift;

    // Throws DegeneratePolicyError on bad ordering or a missing drift handle.
    void validate() const;
};

// Policy induced by a solved instance: thresholds (q*, Q*, S*) shifted by the
// given deltas, drift profile mu(w_star(x)) read off the solved curve
// (clamped to its last value past the curve end).
BandPolicy policy_from_solution(const ProblemSpec& spec,
                                const FreeBoundarySolution& sol,
                                double dq = 0.0, double dQ = 0.0, double dS = 0.0);

// Same thresholds, constant drift rate everywhere.
BandPolicy constant_drift_policy(double q, double Q, double S, double mu);

} // namespace bandctl
