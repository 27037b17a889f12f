#include "bandctl/problem_spec.hpp"

#include <cmath>
#include <string>

#include "bandctl/errors.hpp"

namespace bandctl {

void ProblemSpec::validate() const {
    if (!std::isfinite(sigma) || sigma <= 0.0)
        throw ConfigError("sigma must be a positive finite number");
    auto positive = [](double v, const char* name) {
        if (!std::isfinite(v) || v <= 0.0)
            throw ConfigError(std::string(name) + " must be a positive finite number");
    };
    positive(K, "K");
    positive(k, "k");
    positive(L, "L");
    positive(l, "l");

    double h0 = h(0.0);
    if (!std::isfinite(h0) || std::abs(h0) > 1e-12)
        throw ConfigError("holding cost must vanish at zero");

    // Spot-check strict growth on a spread of scales. This catches flat or
    // decreasing tables and custom functions without needing derivatives.
    const double probes[] = {0.0,  1e-4, 1e-2, 0.1, 0.5, 1.0,
                             2.0,  5.0,  10.0, 50.0, 1e3};
    double prev = h0;
    for (std::size_t i = 1; i < sizeof(probes) / sizeof(probes[0]); ++i) {
        double v = h(probes[i]);
        if (!std::isfinite(v))
            throw ConfigError("holding cost must be finite on [0, 1000]");
        if (v <= prev)
            throw ConfigError("holding cost must be strictly increasing");
        prev = v;
    }
}

} // namespace bandctl
