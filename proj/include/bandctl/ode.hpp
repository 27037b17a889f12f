#pragma once

#include <cstddef>
#include <limits>
#include <variant>
#include <vector>

#include "bandctl/problem_spec.hpp"

namespace bandctl {

// The first-order characteristic equation of the average-cost problem,
//   (sigma^2/2) w'(x) + pi(w(x)) + h(x) = gamma,   w(0) = w0,
// integrated by an adaptive Dormand-Prince 4(5) pair with a quartic dense
// interpolant per accepted step. pi is the drift menu minimum.

enum class Shape { Decreasing, Unimodal, Increasing };

enum class Termination { StoppedByRule, ReachedCap };

struct CurveNode {
    double x;
    double w;
    double wp; // right-hand side evaluated at (x, w)
};

struct LevelCrossing {
    double x;
    int direction; // +1 upward, -1 downward
};

// Stop once x reaches x_cap.
struct ReachX {
    double x_cap;
};

// Stop at the first accepted node with w < level.
struct WBelow {
    double level;
};

// Stop at the first accepted node with w < level after the curve has peaked
// (w' was observed to turn negative, or started non-positive).
struct AfterPeakWBelow {
    double level;
};

using StoppingRule = std::variant<ReachX, WBelow, AfterPeakWBelow>;

struct IntegrateOptions {
    double tol = 1e-10;     // absolute and relative error target per step
    double x_cap = 0.0;     // hard cap; 0 means derive from h and gamma
    double w_guard = 0.0;   // runaway-growth guard on w; 0 means derive
    int max_steps = 2000000;
};

class SolutionCurve {
public:
    double w0 = 0.0;
    double gamma = 0.0;
    Shape shape = Shape::Increasing;
    // Peak location: 0 for decreasing curves, +infinity for increasing ones,
    // otherwise the interior maximizer of w.
    double x_star = std::numeric_limits<double>::infinity();
    Termination termination = Termination::StoppedByRule;
    // True when the curve was rebuilt from persisted samples rather than
    // produced by the adaptive integrator. Sampled curves carry exact node
    // data but only C1 accuracy between nodes at drift switch points, so
    // consumers that need curvature should prefer the nodes themselves.
    bool sampled = false;
    std::vector<CurveNode> nodes;

    double x_end() const { return nodes.back().x; }
    double value(double x) const;
    double derivative(double x) const;
    double peak_value() const;

    // Exact integral of w over [a, b] under the dense representation.
    double integral(double a, double b) const;

    // All sign-changing crossings of w through `level`, refined on the dense
    // interpolant. x = 0 counts only when w starts on the level and moves off
    // it (w'(0) != 0).
    std::vector<LevelCrossing> crossings(double level) const;

    // Rebuild a curve from sampled (x, w, w') nodes, cubic Hermite between
    // samples. Used when loading persisted curves.
    static SolutionCurve from_samples(std::vector<CurveNode> nodes, double w0,
                                      double gamma);

    // Dense polynomial per step, monomial coefficients in theta = (x-x0)/h.
    struct Segment {
        double x0, h;
        double c0, c1, c2, c3, c4;
        double eval(double theta) const {
            return c0 + theta * (c1 + theta * (c2 + theta * (c3 + theta * c4)));
        }
        double deriv(double theta) const { // d/dx
            return (c1 + theta * (2.0 * c2 + theta * (3.0 * c3 + theta * 4.0 * c4))) / h;
        }
        // Antiderivative in x evaluated at theta, zero at theta = 0.
        double anti(double theta) const {
            return h * theta *
                   (c0 + theta * (c1 / 2.0 + theta * (c2 / 3.0 + theta * (c3 / 4.0 + theta * c4 / 5.0))));
        }
    };
    const std::vector<Segment>& segments() const { return segs_; }

private:
    friend SolutionCurve integrate(const ProblemSpec&, double, double,
                                   const StoppingRule&, const IntegrateOptions&);
    std::vector<Segment> segs_;
    std::size_t locate(double x) const;
};

SolutionCurve integrate(const ProblemSpec& spec, double w0, double gamma,
                        const StoppingRule& stop,
                        const IntegrateOptions& opt = {});

struct Classification {
    Shape shape;
    double x_star;
};

// Re-derives the shape from node data; x_star is taken from the curve.
Classification classify(const SolutionCurve& curve);

std::vector<LevelCrossing> find_crossings(const SolutionCurve& curve, double level);

} // namespace bandctl
