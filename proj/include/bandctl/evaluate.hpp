#pragma once

#include <vector>

#include "bandctl/band_policy.hpp"
#include "bandctl/problem_spec.hpp"

namespace bandctl {

// Exact long-run average cost of a band policy, computed from the linear
// second-order equation
//   (sigma^2/2) V''(x) + mu(x) V'(x) + c(mu(x)) + h(x) = gamma
// with V(0) = V(q) + K + k q and V(S) = V(Q) + L + l (S - Q).
//
// Writing w = V', the solution is linear in the unknowns (w0, gamma):
//   w(x) = A(x) w0 + B(x) + gamma C(x)
// where A, B, C solve three fixed initial-value problems. The two boundary
// conditions then form a 2x2 linear system in (w0, gamma).
struct EvalResult {
    double gamma = 0.0;
    double w0 = 0.0;

    struct Node {
        double x;
        double a, b, c; // basis trajectories at x
    };
    std::vector<Node> nodes;

    double cond = 0.0;  // Frobenius condition estimate of the 2x2 system
    double r_up = 0.0;  // residual of the upward boundary condition
    double r_down = 0.0;

    // w(x) = a*w0 + b + gamma*c at the stored nodes
    double w_at(std::size_t i) const {
        const Node& n = nodes[i];
        return n.a * w0 + n.b + gamma * n.c;
    }
};

EvalResult evaluate_band_policy(const ProblemSpec& spec, const BandPolicy& policy,
                                double tol = 1e-10);

} // namespace bandctl
