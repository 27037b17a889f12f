#pragma once

#include <cmath>
#include <cstdint>

// Counter-based random numbers. Each draw is a pure function of (key, counter),
// so replications can run in any order, or in parallel, and still produce
// bit-identical streams for a given seed.

namespace bandctl::rng {

// SplitMix64 finalizer: bijective 64-bit mix.
inline uint64_t mix64(uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Derive a stream key for a replication (or policy) index from the base seed.
// Index 0 maps to the base seed itself so a family of one reproduces a plain run.
inline uint64_t stream_key(uint64_t seed, uint64_t index) {
    return seed + index * 0x9e3779b97f4a7c15ull;
}

// Same draw with the key already mixed; saves rehashing the key in hot
// loops. u01(key, ctr) == u01_premixed(mix64(key), ctr).
inline double u01_premixed(uint64_t mixed_key, uint64_t ctr) {
    uint64_t z = mix64(mixed_key + ctr * 0x9e3779b97f4a7c15ull);
    return static_cast<double>(z >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

// Uniform draw in the open interval (0, 1) at position `ctr` of stream `key`.
inline double u01(uint64_t key, uint64_t ctr) {
    return u01_premixed(mix64(key), ctr);
}

// Inverse standard normal CDF, Acklam's rational approximation.
// Relative error below 1.2e-9 over (0,1); more than enough next to
// Monte Carlo noise, and branch-light for tight loops.
inline double inverse_normal_cdf(double p) {
    static constexpr double a[6] = {
        -3.969683028665376e+01,  2.209460984245205e+02, -2.759285104469687e+02,
         1.383577518672690e+02, -3.066479806614716e+01,  2.506628277459239e+00};
    static constexpr double b[5] = {
        -5.447609879822406e+01,  1.615858368580409e+02, -1.556989798598866e+02,
         6.680131188771972e+01, -1.328068155288572e+01};
    static constexpr double c[6] = {
        -7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
        -2.549732539343734e+00,  4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[4] = {
         7.784695709041462e-03,  3.224671290700398e-01,  2.445134137142996e+00,
         3.754408661907416e+00};
    constexpr double plow = 0.02425;
    if (p < plow) {
        double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - plow) {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
                ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    double q = p - 0.5;
    double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

// Standard normal draw at position `ctr` of stream `key`.
inline double normal(uint64_t key, uint64_t ctr) {
    return inverse_normal_cdf(u01(key, ctr));
}

} // namespace bandctl::rng
