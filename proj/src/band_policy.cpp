#include "bandctl/band_policy.hpp"

#include <cmath>
#include <memory>
#include <sstream>

#include "bandctl/errors.hpp"

namespace bandctl {

void BandPolicy::validate() const {
    if (!drift)
        throw DegeneratePolicyError("band policy: drift profile is missing");
    if (!std::isfinite(q) || !std::isfinite(Q) || !std::isfinite(S) ||
        !(q > 0.0) || !(Q >= q) || !(S > Q)) {
        std::ostringstream msg;
        msg << "band policy: thresholds must satisfy 0 < q <= Q < S, got q = "
            << q << ", Q = " << Q << ", S = " << S;
        throw DegeneratePolicyError(msg.str());
    }
}

BandPolicy policy_from_solution(const ProblemSpec& spec,
                                const FreeBoundarySolution& sol, double dq,
                                double dQ, double dS) {
    BandPolicy p;
    p.q = sol.q_star + dq;
    p.Q = sol.Q_star + dQ;
    p.S = sol.S_star + dS;
    // Share the curve so copies of the policy stay cheap.
    auto curve = std::make_shared<SolutionCurve>(sol.curve);
    DriftMenu menu = spec.menu;
    p.drift = [curve, menu](double x) {
        return menu.evaluate(curve->value(x)).mu;
    };
    return p;
}

BandPolicy constant_drift_policy(double q, double Q, double S, double mu) {
    BandPolicy p;
    p.q = q;
    p.Q = Q;
    p.S = S;
    p.drift = [mu](double) { return mu; };
    return p;
}

} // namespace bandctl
