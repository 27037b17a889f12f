#include "bandctl/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <sstream>
#include <vector>

#include "bandctl/errors.hpp"
#include "bandctl/rng.hpp"

namespace bandctl {

namespace {

struct RepTotals {
    double holding = 0.0; // sum of h(X) over live steps, dt applied later
    double drift_cost = 0.0;
    double up_cost = 0.0;
    double down_cost = 0.0;
    long long up_count = 0;
    long long down_count = 0;
    long long violations = 0;
};

struct DriftCell {
    double drift_dt; // mu * dt, the per-step displacement
    double cost;     // c(mu), accrued per live step
    double mu;       // raw rate, only read when tracing
};

// Interleaved and sized to stay resident in L1 alongside the path loop.
struct DriftTable {
    std::vector<DriftCell> cells;
    double inv_cell = 0.0;
    int n = 0;
};

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};

// Advances W independent replications in lockstep. Each lane keeps its own
// key, state, and totals, so per lane the arithmetic is identical to running
// it alone; the point of the lockstep is that W independent update
// recursions overlap in the pipeline instead of serializing on one lane's
// X -> cell -> X dependency chain. Only lane 0 may trace.
template <int W, typename HFn>
void run_lanes(const DriftTable& tab, const BandPolicy& policy,
               const SimConfig& cfg, const uint64_t* keys, long long n_burn,
               long long n_tot, double sig_sqdt, double up_charge,
               double down_charge, HFn hval, std::FILE* trace,
               RepTotals* out) {
    const double dt = cfg.dt;
    const double S = policy.S;
    const double sig2dt = sig_sqdt * sig_sqdt;
    const double inv_s2dt = 1.0 / sig2dt;
    // exp(-2ab / sigma^2 dt) is below 1e-18 once ab exceeds this, so the
    // bridge test can be skipped away from the boundaries.
    const double near_edge = 20.8 * sig2dt;

    RepTotals t[W];
    uint64_t pk[W];
    double X[W];
    for (int w = 0; w < W; ++w) {
        pk[w] = rng::mix64(keys[w]);
        double x = cfg.x0;
        if (x >= S)
            x = policy.Q;
        else if (x <= 0.0)
            x = policy.q;
        X[w] = x;
    }
    long trace_left = trace ? cfg.trace_max_rows : 0;

    // Diffusion increments are generated in blocks: each draw is a pure
    // function of its counter, so buffering changes nothing except that the
    // generator loop pipelines independently of the path recursions. Scaling
    // by sigma*sqrt(dt) here keeps one multiply off those recursions. The
    // block is sized so the buffers plus the drift table stay inside L1.
    constexpr int kBlock = 256;
    double dwbuf[W][kBlock];

    for (long long n0 = 0; n0 < n_tot; n0 += kBlock) {
        const int m = static_cast<int>(std::min<long long>(kBlock, n_tot - n0));
        for (int w = 0; w < W; ++w)
            for (int i = 0; i < m; ++i)
                dwbuf[w][i] =
                    sig_sqdt * rng::inverse_normal_cdf(rng::u01_premixed(
                                   pk[w], 2 * static_cast<uint64_t>(n0 + i)));
        for (int i = 0; i < m; ++i) {
            const long long n = n0 + i;
            const bool live = n >= n_burn;
            for (int w = 0; w < W; ++w) {
                double x = X[w];
                if (x < 0.0 || x > S) ++t[w].violations;
                int idx = static_cast<int>(x * tab.inv_cell);
                idx = std::clamp(idx, 0, tab.n - 1);
                const DriftCell& cell =
                    tab.cells[static_cast<std::size_t>(idx)];
                if (live) {
                    t[w].holding += hval(x);
                    t[w].drift_cost += cell.cost;
                }
                if (w == 0 && trace_left > 0) {
                    std::fprintf(trace, "%.10g,%.10g,%.10g\n", n * dt, x,
                                 cell.mu);
                    --trace_left;
                }
                // Counters 2n and 2n+1 belong to step n: one normal
                // increment plus one uniform for the bridge crossing test.
                // Counter-based draws keep the stream identical whether or
                // not the uniform is consumed.
                double Xc = x + cell.drift_dt + dwbuf[w][i];
                int hit = 0; // -1 lower boundary, +1 upper
                if (Xc <= 0.0) {
                    hit = -1;
                } else if (Xc >= S) {
                    hit = 1;
                } else {
                    // Both endpoints are inside the band, but the bridge
                    // between them may still have touched a boundary.
                    // Checking only the endpoints leaves an O(sqrt(dt))
                    // bias; the bridge probabilities exp(-2ab / sigma^2 dt)
                    // reduce it to O(dt).
                    double a0 = x * Xc;
                    double aS = (S - x) * (S - Xc);
                    bool maybe_lo = a0 < near_edge;
                    bool maybe_hi = aS < near_edge;
                    if (maybe_lo || maybe_hi) {
                        double u = rng::u01_premixed(
                            pk[w], 2 * static_cast<uint64_t>(n) + 1);
                        if (maybe_lo && u < std::exp(-2.0 * a0 * inv_s2dt))
                            hit = -1;
                        else if (maybe_hi &&
                                 1.0 - u < std::exp(-2.0 * aS * inv_s2dt))
                            hit = 1;
                    }
                }
                if (hit < 0) {
                    x = policy.q;
                    if (live) {
                        t[w].up_cost += up_charge;
                        ++t[w].up_count;
                    }
                } else if (hit > 0) {
                    x = policy.Q;
                    if (live) {
                        t[w].down_cost += down_charge;
                        ++t[w].down_count;
                    }
                } else {
                    x = Xc;
                }
                X[w] = x;
            }
        }
    }
    for (int w = 0; w < W; ++w) out[w] = t[w];
}

} // namespace

SimReport simulate(const ProblemSpec& spec, const BandPolicy& policy,
                   const SimConfig& cfg) {
    spec.validate();
    policy.validate();
    if (!std::isfinite(cfg.dt) || cfg.dt <= 0.0)
        throw ConfigError("simulate: dt must be positive and finite");
    if (!std::isfinite(cfg.horizon) || cfg.horizon <= 0.0)
        throw ConfigError("simulate: horizon must be positive and finite");
    if (!std::isfinite(cfg.burn_in) || cfg.burn_in < 0.0)
        throw ConfigError("simulate: burn-in must be non-negative");
    if (cfg.replications < 1)
        throw ConfigError("simulate: need at least one replication");
    if (!std::isfinite(cfg.x0) || cfg.x0 < 0.0)
        throw ConfigError("simulate: x0 must be non-negative");

    SimReport rep;

    // One Euler step can reach dt*|mu| + 4 sigma sqrt(dt) beyond its start.
    // If that spans the gap to a boundary, impulses fire on discretization
    // noise rather than on the controlled process.
    const double M = spec.menu.lipschitz_constant();
    double reach = cfg.dt * M + 4.0 * spec.sigma * std::sqrt(cfg.dt);
    double narrow = std::min(policy.q, policy.S - policy.Q);
    if (reach > narrow) {
        std::ostringstream w;
        w << "step reach " << reach << " exceeds the narrowest band gap "
          << narrow << "; decrease dt";
        if (cfg.strict) throw ConfigError("simulate: " + w.str());
        rep.warnings.push_back(w.str());
    }

    long long n_burn = std::llround(cfg.burn_in / cfg.dt);
    long long n_tot = std::llround(cfg.horizon / cfg.dt);
    if (n_tot <= n_burn)
        throw ConfigError("simulate: horizon must exceed the burn-in");
    const double t_live = static_cast<double>(n_tot - n_burn) * cfg.dt;

    // The drift profile is sampled onto a uniform grid over the band. The
    // profile is piecewise constant in practice, so the only discretization
    // effect is rounding each switch point to a cell edge; the two competing
    // rates are near-tied there, making the induced cost error second order
    // in the cell width.
    DriftTable tab;
    tab.n = 512;
    tab.inv_cell = tab.n / policy.S;
    tab.cells.resize(static_cast<std::size_t>(tab.n));
    for (int i = 0; i < tab.n; ++i) {
        double x = (i + 0.5) * policy.S / tab.n;
        double mu = policy.drift(x);
        if (!std::isfinite(mu))
            throw ConfigError("simulate: drift profile returned a non-finite rate");
        tab.cells[static_cast<std::size_t>(i)] = {mu * cfg.dt,
                                                  spec.menu.cost_at(mu), mu};
    }

    std::unique_ptr<std::FILE, FileCloser> trace;
    if (!cfg.trace_path.empty()) {
        if (cfg.trace_max_rows < 1)
            throw ConfigError("simulate: trace row cap must be positive");
        trace.reset(std::fopen(cfg.trace_path.c_str(), "w"));
        if (!trace)
            throw ConfigError("simulate: cannot open trace file " + cfg.trace_path);
        std::fprintf(trace.get(), "t,x,mu\n");
    }

    const double sig_sqdt = spec.sigma * std::sqrt(cfg.dt);
    const double up_charge = spec.K + spec.k * policy.q;
    const double down_charge = spec.L + spec.l * (policy.S - policy.Q);

    std::vector<RepTotals> totals(static_cast<std::size_t>(cfg.replications));
    auto run_all = [&](auto hval) {
        int r = 0;
        while (r < cfg.replications) {
            uint64_t keys[4];
            int w = std::min(4, cfg.replications - r);
            for (int j = 0; j < w; ++j)
                keys[j] =
                    rng::stream_key(cfg.seed, static_cast<uint64_t>(r + j));
            std::FILE* tr = (r == 0) ? trace.get() : nullptr;
            RepTotals* out = totals.data() + r;
            if (w == 4)
                run_lanes<4>(tab, policy, cfg, keys, n_burn, n_tot, sig_sqdt,
                             up_charge, down_charge, hval, tr, out);
            else if (w == 3)
                run_lanes<3>(tab, policy, cfg, keys, n_burn, n_tot, sig_sqdt,
                             up_charge, down_charge, hval, tr, out);
            else if (w == 2)
                run_lanes<2>(tab, policy, cfg, keys, n_burn, n_tot, sig_sqdt,
                             up_charge, down_charge, hval, tr, out);
            else
                run_lanes<1>(tab, policy, cfg, keys, n_burn, n_tot, sig_sqdt,
                             up_charge, down_charge, hval, tr, out);
            r += w;
        }
    };
    switch (spec.h.family()) {
    case HoldingCost::Family::Linear:
        run_all([a = spec.h.coeff()](double x) { return a * x; });
        break;
    case HoldingCost::Family::Power:
        run_all([a = spec.h.coeff(), p = spec.h.exponent()](double x) {
            return a * std::pow(x, p);
        });
        break;
    default:
        run_all([&h = spec.h](double x) { return h(x); });
        break;
    }

    const double R = static_cast<double>(cfg.replications);
    rep.rep_gammas.reserve(totals.size());
    for (const RepTotals& t : totals) {
        double hold = t.holding * cfg.dt / t_live;
        double drive = t.drift_cost * cfg.dt / t_live;
        double up = t.up_cost / t_live;
        double down = t.down_cost / t_live;
        rep.holding_rate += hold / R;
        rep.drift_cost_rate += drive / R;
        rep.up_impulse_rate += up / R;
        rep.down_impulse_rate += down / R;
        rep.up_count_rate += static_cast<double>(t.up_count) / t_live / R;
        rep.down_count_rate += static_cast<double>(t.down_count) / t_live / R;
        rep.path_invariant_violations += t.violations;
        rep.rep_gammas.push_back(hold + drive + up + down);
    }
    rep.gamma_hat = rep.holding_rate + rep.drift_cost_rate +
                    rep.up_impulse_rate + rep.down_impulse_rate;

    if (cfg.replications > 1) {
        double mean = 0.0;
        for (double g : rep.rep_gammas) mean += g;
        mean /= R;
        double ss = 0.0;
        for (double g : rep.rep_gammas) ss += (g - mean) * (g - mean);
        rep.std_err = std::sqrt(ss / (R - 1.0) / R);
    }
    return rep;
}

std::vector<SimReport> sweep(const ProblemSpec& spec,
                             const std::vector<BandPolicy>& policies,
                             const SimConfig& cfg) {
    std::vector<SimReport> out;
    out.reserve(policies.size());
    for (std::size_t i = 0; i < policies.size(); ++i) {
        SimConfig c = cfg;
        // Shift by i * 2^32 replication slots so per-policy streams cannot
        // collide with each other's replication keys; index 0 keeps the base
        // seed, making a family of one bit-identical to a plain run.
        c.seed = rng::stream_key(cfg.seed, static_cast<uint64_t>(i) << 32);
        if (i > 0) c.trace_path.clear();
        out.push_back(simulate(spec, policies[i], c));
    }
    return out;
}

} // namespace bandctl
