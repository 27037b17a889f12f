#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "bandctl/band_policy.hpp"
#include "bandctl/certify.hpp"
#include "bandctl/evaluate.hpp"
#include "bandctl/free_boundary.hpp"
#include "bandctl/problem_spec.hpp"
#include "bandctl/simulate.hpp"

// JSON config loading, artifact writing, and artifact re-loading. Every
// artifact records the tool version and the hash of the config that
// produced it.

namespace bandctl::io {

inline constexpr const char* kToolVersion = "0.1.0";

uint64_t fnv1a(std::string_view bytes);
std::string hash_hex(uint64_t h);

struct LoadedConfig {
    ProblemSpec spec;
    SolveOptions solve;
    CertifyOptions certify;
    SimConfig sim;
    uint64_t config_hash = 0;
};

// Parses and validates a config file. Throws ConfigError on malformed JSON,
// unknown families, or out-of-range values.
LoadedConfig load_config(const std::string& path);

// Same, from an in-memory JSON string (tests).
LoadedConfig parse_config(const std::string& text);

// Writes solution.json plus curve.csv (columns x, w_star, mu_star) into dir.
void write_solution(const std::string& dir, const FreeBoundarySolution& sol,
                    const LoadedConfig& cfg);

struct LoadedSolution {
    double w0 = 0.0, gamma = 0.0;
    double q = 0.0, Q = 0.0, S = 0.0, x_star = 0.0;
    // Curve rebuilt from the CSV samples; node slopes recovered by finite
    // differences of the samples so downstream checks stay independent of
    // the stored gamma.
    SolutionCurve curve;
};

LoadedSolution load_solution(const std::string& json_path);

// Band policy encoded by a loaded solution: thresholds from the file, drift
// profile mu(w(x)) from the rebuilt curve.
BandPolicy policy_from_loaded(const ProblemSpec& spec, const LoadedSolution& ls);

// Parses "q=..,Q=..,S=..,mu=const:<v>" or "...,mu=from-solution" (the latter
// needs a loaded solution for the profile). Throws ConfigError.
BandPolicy parse_policy(const ProblemSpec& spec, const std::string& text,
                        const LoadedSolution* ls);

void write_eval(const std::string& dir, const EvalResult& res,
                const BandPolicy& policy, const LoadedConfig& cfg);
void write_sim(const std::string& dir, const SimReport& rep,
               const BandPolicy& policy, const SimConfig& sim,
               const LoadedConfig& cfg);
void write_certification(const std::string& dir, const CertificationReport& rep,
                         double gamma, const LoadedConfig& cfg);
void write_sweep(const std::string& dir, const std::vector<SimReport>& reps,
                 const std::vector<BandPolicy>& policies, const SimConfig& sim,
                 const LoadedConfig& cfg);

} // namespace bandctl::io
