#pragma once

#include <stdexcept>
#include <string>

namespace bandctl {

// Invalid problem instance, config file, or policy input.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A root bracket could not be established or was lost during refinement.
struct BracketError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Step size collapsed below the useful floor while integrating.
struct StiffnessError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Integration ran past the hard x cap after the curve had already peaked,
// so the requested stopping condition could not be reached.
struct CapExceededError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Curve shape could not be determined from the integrated data.
struct ClassificationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Band policy unusable for evaluation: bad ordering, or the boundary-condition
// system is numerically singular.
struct DegeneratePolicyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Free-boundary solve failed; the message carries the bracketing trace.
struct SolveError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace bandctl
