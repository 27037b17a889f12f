#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "bandctl/band_policy.hpp"
#include "bandctl/certify.hpp"
#include "bandctl/errors.hpp"
#include "bandctl/evaluate.hpp"
#include "bandctl/free_boundary.hpp"
#include "bandctl/io.hpp"
#include "bandctl/simulate.hpp"

using namespace bandctl;

namespace {

// Wraps a persisted solution so the certificate checker can run on it. The
// curve comes from the CSV samples, so a tampered gamma_star does not leak
// back into the value function.
FreeBoundarySolution as_solution(const io::LoadedSolution& ls) {
    FreeBoundarySolution sol;
    sol.w0_star = ls.w0;
    sol.gamma_star = ls.gamma;
    sol.q_star = ls.q;
    sol.Q_star = ls.Q;
    sol.S_star = ls.S;
    sol.x_star = ls.x_star;
    sol.curve = ls.curve;
    return sol;
}

BandPolicy make_policy(const ProblemSpec& spec, const std::string& policy_str,
                       const std::optional<io::LoadedSolution>& ls) {
    if (!policy_str.empty())
        return io::parse_policy(spec, policy_str, ls ? &*ls : nullptr);
    if (ls) return io::policy_from_loaded(spec, *ls);
    throw ConfigError("need --policy or --from-solution to define the band policy");
}

void print_sim_report(const SimReport& rep) {
    std::printf("gamma_hat   = %.10g  (std err %.3g, %zu replications)\n",
                rep.gamma_hat, rep.std_err, rep.rep_gammas.size());
    std::printf("  holding %.6g + drift cost %.6g + up %.6g + down %.6g\n",
                rep.holding_rate, rep.drift_cost_rate, rep.up_impulse_rate,
                rep.down_impulse_rate);
    std::printf("  adjustments per unit time: up %.6g, down %.6g\n",
                rep.up_count_rate, rep.down_count_rate);
    if (rep.path_invariant_violations > 0)
        std::printf("  states outside [0, S]: %lld\n", rep.path_invariant_violations);
    for (const auto& w : rep.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimal drift-rate and two-sided adjustment-band control of a "
                 "Brownian inventory level under long-run average cost"};
    app.require_subcommand(1);
    // Let --config / --out-dir appear either before or after the subcommand.
    app.fallthrough();

    std::string config_path;
    std::string out_dir = "out";
    app.add_option("--config", config_path, "Instance config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    app.add_option("--out-dir", out_dir, "Directory for result documents");

    auto* cmd_solve = app.add_subcommand("solve", "Solve the free-boundary problem");
    double solve_tol = 0.0;
    auto* opt_tol = cmd_solve->add_option(
        "--tol", solve_tol, "Root tolerance override (integrator runs at tol/10)");

    auto* cmd_eval =
        app.add_subcommand("eval", "Exact long-run average cost of a band policy");
    std::string eval_policy, eval_solution;
    cmd_eval->add_option("--policy", eval_policy,
                         "q=..,Q=..,S=..,mu=const:<v>|from-solution");
    cmd_eval->add_option("--from-solution", eval_solution,
                         "solution.json from a previous solve");

    auto* cmd_sim =
        app.add_subcommand("simulate", "Monte Carlo estimate under a band policy");
    std::string sim_policy, sim_solution, trace_path;
    double sim_dt = 0, sim_horizon = 0, sim_burn = 0, sim_x0 = 0;
    long long sim_reps = 0;
    unsigned long long sim_seed = 0;
    bool sim_strict = false;
    cmd_sim->add_option("--policy", sim_policy,
                        "q=..,Q=..,S=..,mu=const:<v>|from-solution");
    cmd_sim->add_option("--from-solution", sim_solution,
                        "solution.json from a previous solve");
    auto* o_dt = cmd_sim->add_option("--dt", sim_dt, "Step size");
    auto* o_hor = cmd_sim->add_option("--horizon", sim_horizon, "Time per replication");
    auto* o_burn = cmd_sim->add_option("--burn-in", sim_burn, "Discarded warmup time");
    auto* o_reps = cmd_sim->add_option("--replications", sim_reps, "Replication count");
    auto* o_seed = cmd_sim->add_option("--seed", sim_seed, "Base seed");
    auto* o_x0 = cmd_sim->add_option("--x0", sim_x0, "Initial inventory level");
    cmd_sim->add_flag("--strict", sim_strict,
                      "Treat the coarse-step warning as an error");
    cmd_sim->add_option("--trace", trace_path,
                        "CSV trace of the first replication (capped)");

    auto* cmd_verify =
        app.add_subcommand("verify", "Check the optimality certificate of a solution");
    std::string verify_solution;
    double verify_gamma = 0, verify_xmax = 0, verify_tol = 0;
    long long verify_grid = 0;
    cmd_verify->add_option("--solution", verify_solution, "solution.json to check")
        ->required()
        ->check(CLI::ExistingFile);
    auto* o_vg = cmd_verify->add_option("--gamma", verify_gamma,
                                        "Rate to certify (default: stored rate)");
    auto* o_vx = cmd_verify->add_option("--x-max", verify_xmax, "Grid endpoint");
    auto* o_vn = cmd_verify->add_option("--n-grid", verify_grid, "Grid size");
    auto* o_vt = cmd_verify->add_option("--tol", verify_tol, "Slack tolerance");

    auto* cmd_sweep = app.add_subcommand(
        "sweep", "Simulate a family of policies with perturbed thresholds");
    std::string sweep_solution, sweep_param = "S";
    std::vector<double> sweep_deltas;
    double sw_dt = 0, sw_horizon = 0, sw_burn = 0, sw_x0 = 0;
    long long sw_reps = 0;
    unsigned long long sw_seed = 0;
    cmd_sweep->add_option("--from-solution", sweep_solution,
                          "solution.json supplying thresholds and drift profile")
        ->required()
        ->check(CLI::ExistingFile);
    cmd_sweep->add_option("--param", sweep_param, "Threshold to perturb: q, Q or S")
        ->check(CLI::IsMember({"q", "Q", "S"}));
    cmd_sweep->add_option("--deltas", sweep_deltas, "Comma-separated shifts")
        ->delimiter(',')
        ->required();
    auto* w_dt = cmd_sweep->add_option("--dt", sw_dt, "Step size");
    auto* w_hor = cmd_sweep->add_option("--horizon", sw_horizon, "Time per replication");
    auto* w_burn = cmd_sweep->add_option("--burn-in", sw_burn, "Discarded warmup time");
    auto* w_reps = cmd_sweep->add_option("--replications", sw_reps, "Replication count");
    auto* w_seed = cmd_sweep->add_option("--seed", sw_seed, "Base seed");
    auto* w_x0 = cmd_sweep->add_option("--x0", sw_x0, "Initial inventory level");

    CLI11_PARSE(app, argc, argv);

    try {
        io::LoadedConfig cfg = io::load_config(config_path);

        if (cmd_solve->parsed()) {
            if (opt_tol->count()) {
                if (solve_tol <= 0) throw ConfigError("--tol must be positive");
                cfg.solve.root_tol = solve_tol;
                cfg.solve.integrator_tol = solve_tol * 0.1;
            }
            FreeBoundarySolution sol = solve(cfg.spec, cfg.solve);
            std::printf("gamma_star = %.12g\n", sol.gamma_star);
            std::printf("w0_star    = %.12g\n", sol.w0_star);
            std::printf("q_star     = %.12g\n", sol.q_star);
            std::printf("Q_star     = %.12g\n", sol.Q_star);
            std::printf("S_star     = %.12g\n", sol.S_star);
            std::printf("x_star     = %.12g\n", sol.x_star);
            std::printf("residuals  : r1=%.3g r2=%.3g r3=%.3g r4=%.3g r5=%.3g\n",
                        sol.r1, sol.r2, sol.r3, sol.r4, sol.r5);
            io::write_solution(out_dir, sol, cfg);
            std::printf("wrote %s/solution.json and %s/curve.csv\n", out_dir.c_str(),
                        out_dir.c_str());
            return 0;
        }

        if (cmd_eval->parsed()) {
            std::optional<io::LoadedSolution> ls;
            if (!eval_solution.empty()) ls = io::load_solution(eval_solution);
            BandPolicy policy = make_policy(cfg.spec, eval_policy, ls);
            EvalResult res = evaluate_band_policy(cfg.spec, policy,
                                                  cfg.solve.integrator_tol);
            std::printf("gamma  = %.12g\n", res.gamma);
            std::printf("w0     = %.12g\n", res.w0);
            std::printf("residuals: up %.3g, down %.3g (cond %.3g)\n", res.r_up,
                        res.r_down, res.cond);
            io::write_eval(out_dir, res, policy, cfg);
            std::printf("wrote %s/eval.json\n", out_dir.c_str());
            return 0;
        }

        if (cmd_sim->parsed()) {
            std::optional<io::LoadedSolution> ls;
            if (!sim_solution.empty()) ls = io::load_solution(sim_solution);
            BandPolicy policy = make_policy(cfg.spec, sim_policy, ls);
            if (o_dt->count()) cfg.sim.dt = sim_dt;
            if (o_hor->count()) cfg.sim.horizon = sim_horizon;
            if (o_burn->count()) cfg.sim.burn_in = sim_burn;
            if (o_reps->count()) cfg.sim.replications = static_cast<int>(sim_reps);
            if (o_seed->count()) cfg.sim.seed = sim_seed;
            if (o_x0->count()) cfg.sim.x0 = sim_x0;
            cfg.sim.strict = sim_strict;
            cfg.sim.trace_path = trace_path;
            SimReport rep = simulate(cfg.spec, policy, cfg.sim);
            print_sim_report(rep);
            io::write_sim(out_dir, rep, policy, cfg.sim, cfg);
            std::printf("wrote %s/sim.json\n", out_dir.c_str());
            return 0;
        }

        if (cmd_verify->parsed()) {
            io::LoadedSolution ls = io::load_solution(verify_solution);
            FreeBoundarySolution sol = as_solution(ls);
            double gamma = o_vg->count() ? verify_gamma : ls.gamma;
            CertifyOptions opt = cfg.certify;
            if (o_vx->count()) opt.x_max = verify_xmax;
            if (o_vn->count()) opt.n_grid = static_cast<int>(verify_grid);
            if (o_vt->count()) opt.tol = verify_tol;
            CertificationReport rep = check_lower_bound(cfg.spec, sol, gamma, opt);
            std::printf("gamma checked    = %.12g\n", gamma);
            std::printf("min drift slack  = %.6g\n", rep.min_drift_slack);
            std::printf("min up slack     = %.6g\n", rep.min_up_slack);
            std::printf("min down slack   = %.6g\n", rep.min_down_slack);
            std::printf("f lower bound    = %.6g\n", rep.f_lower_bound);
            io::write_certification(out_dir, rep, gamma, cfg);
            std::printf("wrote %s/certification.json\n", out_dir.c_str());
            if (!rep.passed) {
                std::fprintf(stderr, "certificate FAILED (%zu violations)\n",
                             rep.violations.size());
                for (std::size_t i = 0; i < rep.violations.size() && i < 5; ++i) {
                    const auto& v = rep.violations[i];
                    std::fprintf(stderr, "  %s slack %.6g at x=%.6g y=%.6g\n",
                                 v.kind.c_str(), v.slack, v.x, v.y);
                }
                return 4;
            }
            std::printf("certificate passed on [0, %.6g] with %d grid points\n",
                        rep.x_max, rep.n_grid);
            return 0;
        }

        if (cmd_sweep->parsed()) {
            io::LoadedSolution ls = io::load_solution(sweep_solution);
            if (w_dt->count()) cfg.sim.dt = sw_dt;
            if (w_hor->count()) cfg.sim.horizon = sw_horizon;
            if (w_burn->count()) cfg.sim.burn_in = sw_burn;
            if (w_reps->count()) cfg.sim.replications = static_cast<int>(sw_reps);
            if (w_seed->count()) cfg.sim.seed = sw_seed;
            if (w_x0->count()) cfg.sim.x0 = sw_x0;
            std::vector<BandPolicy> family;
            for (double d : sweep_deltas) {
                BandPolicy p = io::policy_from_loaded(cfg.spec, ls);
                if (sweep_param == "q") p.q += d;
                if (sweep_param == "Q") p.Q += d;
                if (sweep_param == "S") p.S += d;
                p.validate();
                family.push_back(std::move(p));
            }
            std::vector<SimReport> reps = sweep(cfg.spec, family, cfg.sim);
            std::printf("%-10s %-14s %-12s\n", "delta", "gamma_hat", "std_err");
            for (std::size_t i = 0; i < reps.size(); ++i)
                std::printf("%-10.4g %-14.8g %-12.3g\n", sweep_deltas[i],
                            reps[i].gamma_hat, reps[i].std_err);
            io::write_sweep(out_dir, reps, family, cfg.sim, cfg);
            std::printf("wrote %s/sweep.json\n", out_dir.c_str());
            return 0;
        }

        std::fprintf(stderr, "no command\n");
        return 1;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const DegeneratePolicyError& e) {
        std::fprintf(stderr, "policy error: %s\n", e.what());
        return 2;
    } catch (const SolveError& e) {
        std::fprintf(stderr, "solver error: %s\n", e.what());
        return 3;
    } catch (const BracketError& e) {
        std::fprintf(stderr, "solver error: %s\n", e.what());
        return 3;
    } catch (const StiffnessError& e) {
        std::fprintf(stderr, "solver error: %s\n", e.what());
        return 3;
    } catch (const CapExceededError& e) {
        std::fprintf(stderr, "solver error: %s\n", e.what());
        return 3;
    } catch (const ClassificationError& e) {
        std::fprintf(stderr, "solver error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
