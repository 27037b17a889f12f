#include "bandctl/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "bandctl/errors.hpp"

namespace bandctl::io {

namespace fs = std::filesystem;
using nlohmann::json;

uint64_t fnv1a(std::string_view bytes) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hash_hex(uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

[[noreturn]] void bad(const std::string& what) { throw ConfigError("config: " + what); }

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const char* where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed)
            if (it.key() == a) ok = true;
        if (!ok) bad(std::string("unknown key \"") + it.key() + "\" in " + where);
    }
}

const json& member(const json& j, const char* key, const char* where) {
    auto it = j.find(key);
    if (it == j.end()) bad(std::string(where) + " is missing \"" + key + "\"");
    return *it;
}

double num(const json& j, const char* key, const char* where) {
    const json& v = member(j, key, where);
    if (!v.is_number()) bad(std::string(where) + "." + key + " must be a number");
    return v.get<double>();
}

double num_or(const json& j, const char* key, const char* where, double fallback) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    if (!it->is_number()) bad(std::string(where) + "." + key + " must be a number");
    return it->get<double>();
}

long long integer(const json& j, const char* key, const char* where, long long fallback) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    if (!it->is_number_integer() && !it->is_number_unsigned())
        bad(std::string(where) + "." + key + " must be an integer");
    return it->get<long long>();
}

std::vector<std::pair<double, double>> point_list(const json& v, const char* where) {
    if (!v.is_array() || v.empty()) bad(std::string(where) + " must be a non-empty array");
    std::vector<std::pair<double, double>> pts;
    pts.reserve(v.size());
    for (const json& row : v) {
        if (!row.is_array() || row.size() != 2 || !row[0].is_number() ||
            !row[1].is_number())
            bad(std::string(where) + " entries must be [number, number] pairs");
        pts.emplace_back(row[0].get<double>(), row[1].get<double>());
    }
    return pts;
}

HoldingCost parse_holding(const json& j) {
    if (!j.is_object()) bad("holding must be an object");
    check_keys(j, {"family", "a", "p", "points"}, "holding");
    const json& fam = member(j, "family", "holding");
    if (!fam.is_string()) bad("holding.family must be a string");
    std::string name = fam.get<std::string>();
    if (name == "linear") return HoldingCost::linear(num(j, "a", "holding"));
    if (name == "power")
        return HoldingCost::power(num(j, "a", "holding"), num(j, "p", "holding"));
    if (name == "table")
        return HoldingCost::table(point_list(member(j, "points", "holding"),
                                             "holding.points"));
    bad("unknown holding family \"" + name + "\"");
}

// Piecewise-linear drift cost for interval menus given as a table. The table
// has to cover the whole interval so no extrapolation is ever needed.
std::function<double(double)> table_cost(std::vector<std::pair<double, double>> pts,
                                         double lo, double hi) {
    if (pts.size() < 2) bad("drift_menu.cost.points needs at least two points");
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (!std::isfinite(pts[i].first) || !std::isfinite(pts[i].second))
            bad("drift_menu.cost.points must be finite");
        if (i > 0 && pts[i].first <= pts[i - 1].first)
            bad("drift_menu.cost.points must have strictly increasing mu");
    }
    if (pts.front().first > lo || pts.back().first < hi)
        bad("drift_menu.cost.points must cover [lo, hi]");
    return [pts = std::move(pts)](double mu) {
        auto it = std::upper_bound(pts.begin(), pts.end(), mu,
                                   [](double v, const auto& p) { return v < p.first; });
        std::size_t i = it == pts.begin() ? 1
                        : it == pts.end() ? pts.size() - 1
                                          : static_cast<std::size_t>(it - pts.begin());
        double x0 = pts[i - 1].first, y0 = pts[i - 1].second;
        double slope = (pts[i].second - y0) / (pts[i].first - x0);
        return y0 + slope * (mu - x0);
    };
}

DriftMenu parse_menu(const json& j) {
    if (!j.is_object()) bad("drift_menu must be an object");
    check_keys(j, {"type", "entries", "lo", "hi", "cost", "grid_points"}, "drift_menu");
    const json& type = member(j, "type", "drift_menu");
    if (!type.is_string()) bad("drift_menu.type must be a string");
    std::string name = type.get<std::string>();
    if (name == "finite") {
        auto pts = point_list(member(j, "entries", "drift_menu"), "drift_menu.entries");
        std::vector<DriftEntry> entries;
        entries.reserve(pts.size());
        for (auto& [mu, cost] : pts) entries.push_back({mu, cost});
        return DriftMenu::finite_set(std::move(entries));
    }
    if (name == "interval") {
        double lo = num(j, "lo", "drift_menu");
        double hi = num(j, "hi", "drift_menu");
        int grid = static_cast<int>(integer(j, "grid_points", "drift_menu", 1025));
        const json& cost = member(j, "cost", "drift_menu");
        if (!cost.is_object()) bad("drift_menu.cost must be an object");
        check_keys(cost, {"family", "a", "b", "d", "points"}, "drift_menu.cost");
        const json& fam = member(cost, "family", "drift_menu.cost");
        if (!fam.is_string()) bad("drift_menu.cost.family must be a string");
        std::string cname = fam.get<std::string>();
        std::function<double(double)> fn;
        if (cname == "quadratic") {
            double a = num(cost, "a", "drift_menu.cost");
            double b = num_or(cost, "b", "drift_menu.cost", 0.0);
            double d = num_or(cost, "d", "drift_menu.cost", 0.0);
            fn = [a, b, d](double mu) { return a * mu * mu + b * mu + d; };
        } else if (cname == "absolute") {
            double a = num(cost, "a", "drift_menu.cost");
            fn = [a](double mu) { return a * std::fabs(mu); };
        } else if (cname == "table") {
            fn = table_cost(point_list(member(cost, "points", "drift_menu.cost"),
                                       "drift_menu.cost.points"),
                            lo, hi);
        } else {
            bad("unknown drift cost family \"" + cname + "\"");
        }
        return DriftMenu::interval(lo, hi, std::move(fn), grid);
    }
    bad("unknown drift_menu type \"" + name + "\"");
}

} // namespace

LoadedConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) bad("top level must be an object");
    check_keys(j, {"sigma", "costs", "holding", "drift_menu", "tolerances", "certify",
                   "sim"},
               "config");

    LoadedConfig out;
    out.spec.sigma = num(j, "sigma", "config");

    const json& costs = member(j, "costs", "config");
    if (!costs.is_object()) bad("costs must be an object");
    check_keys(costs, {"K", "k", "L", "l"}, "costs");
    out.spec.K = num(costs, "K", "costs");
    out.spec.k = num(costs, "k", "costs");
    out.spec.L = num(costs, "L", "costs");
    out.spec.l = num(costs, "l", "costs");

    out.spec.h = parse_holding(member(j, "holding", "config"));
    out.spec.menu = parse_menu(member(j, "drift_menu", "config"));
    out.spec.validate();

    if (auto it = j.find("tolerances"); it != j.end()) {
        if (!it->is_object()) bad("tolerances must be an object");
        check_keys(*it, {"root_tol", "integrator_tol", "residual_target"}, "tolerances");
        out.solve.root_tol = num_or(*it, "root_tol", "tolerances", out.solve.root_tol);
        out.solve.integrator_tol =
            num_or(*it, "integrator_tol", "tolerances", out.solve.integrator_tol);
        out.solve.residual_target =
            num_or(*it, "residual_target", "tolerances", out.solve.residual_target);
        if (out.solve.root_tol <= 0 || out.solve.integrator_tol <= 0 ||
            out.solve.residual_target <= 0)
            bad("tolerances must be positive");
    }

    if (auto it = j.find("certify"); it != j.end()) {
        if (!it->is_object()) bad("certify must be an object");
        check_keys(*it, {"x_max", "n_grid", "tol", "max_pair_samples"}, "certify");
        out.certify.x_max = num_or(*it, "x_max", "certify", out.certify.x_max);
        out.certify.n_grid =
            static_cast<int>(integer(*it, "n_grid", "certify", out.certify.n_grid));
        out.certify.tol = num_or(*it, "tol", "certify", out.certify.tol);
        out.certify.max_pair_samples = static_cast<int>(
            integer(*it, "max_pair_samples", "certify", out.certify.max_pair_samples));
    }

    if (auto it = j.find("sim"); it != j.end()) {
        if (!it->is_object()) bad("sim must be an object");
        check_keys(*it, {"dt", "horizon", "burn_in", "replications", "seed", "x0"},
                   "sim");
        out.sim.dt = num_or(*it, "dt", "sim", out.sim.dt);
        out.sim.horizon = num_or(*it, "horizon", "sim", out.sim.horizon);
        out.sim.burn_in = num_or(*it, "burn_in", "sim", out.sim.burn_in);
        out.sim.replications = static_cast<int>(
            integer(*it, "replications", "sim", out.sim.replications));
        long long seed = integer(*it, "seed", "sim", static_cast<long long>(out.sim.seed));
        if (seed < 0) bad("sim.seed must be non-negative");
        out.sim.seed = static_cast<uint64_t>(seed);
        out.sim.x0 = num_or(*it, "x0", "sim", out.sim.x0);
    }

    out.config_hash = fnv1a(text);
    return out;
}

LoadedConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

namespace {

json stamp(const LoadedConfig& cfg) {
    return json{{"tool_version", kToolVersion},
                {"config_hash", hash_hex(cfg.config_hash)}};
}

void dump_to(const std::string& dir, const char* name, const json& j) {
    fs::create_directories(dir);
    fs::path p = fs::path(dir) / name;
    std::ofstream out(p);
    if (!out) throw ConfigError("cannot write " + p.string());
    out << j.dump(2) << "\n";
}

json policy_json(const BandPolicy& p) {
    return json{{"q", p.q}, {"Q", p.Q}, {"S", p.S}};
}

json sim_json(const SimConfig& sim) {
    return json{{"dt", sim.dt},
                {"horizon", sim.horizon},
                {"burn_in", sim.burn_in},
                {"replications", sim.replications},
                {"seed", sim.seed},
                {"x0", sim.x0}};
}

json report_json(const SimReport& rep) {
    return json{{"gamma_hat", rep.gamma_hat},
                {"std_err", rep.std_err},
                {"holding_rate", rep.holding_rate},
                {"drift_cost_rate", rep.drift_cost_rate},
                {"up_impulse_rate", rep.up_impulse_rate},
                {"down_impulse_rate", rep.down_impulse_rate},
                {"up_count_rate", rep.up_count_rate},
                {"down_count_rate", rep.down_count_rate},
                {"path_invariant_violations", rep.path_invariant_violations},
                {"rep_gammas", rep.rep_gammas},
                {"warnings", rep.warnings}};
}

constexpr int kCurveSamples = 4097;

} // namespace

void write_solution(const std::string& dir, const FreeBoundarySolution& sol,
                    const LoadedConfig& cfg) {
    fs::create_directories(dir);
    double x_end = sol.curve.x_end();

    fs::path csv = fs::path(dir) / "curve.csv";
    std::ofstream out(csv);
    if (!out) throw ConfigError("cannot write " + csv.string());
    out << "x,w_star,w_prime,mu_star\n";
    char line[160];
    const double two_over_sig2 = 2.0 / cfg.spec.sigma2();
    for (int i = 0; i < kCurveSamples; ++i) {
        double x = x_end * i / (kCurveSamples - 1);
        double w = sol.curve.value(x);
        auto br = cfg.spec.menu.evaluate(w);
        // The slope is written from the rate equation itself rather than
        // from the interpolant: the interpolant's derivative loses accuracy
        // inside the one integrator step that straddles each drift switch,
        // while the identity is as accurate as the value column everywhere.
        double wp = two_over_sig2 * (sol.gamma_star - br.value - cfg.spec.h(x));
        std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g,%.17g\n", x, w,
                      wp, br.mu);
        out << line;
    }
    out.close();

    json j = stamp(cfg);
    j["w0_star"] = sol.w0_star;
    j["gamma_star"] = sol.gamma_star;
    j["q_star"] = sol.q_star;
    j["Q_star"] = sol.Q_star;
    j["S_star"] = sol.S_star;
    j["x_star"] = sol.x_star;
    j["residuals"] = json{{"r1", sol.r1}, {"r2", sol.r2}, {"r3", sol.r3},
                          {"r4", sol.r4}, {"r5", sol.r5}};
    j["curve_csv"] = "curve.csv";
    j["curve_samples"] = kCurveSamples;
    j["x_end"] = x_end;
    dump_to(dir, "solution.json", j);
}

LoadedSolution load_solution(const std::string& json_path) {
    std::ifstream in(json_path, std::ios::binary);
    if (!in) throw ConfigError("cannot open solution file: " + json_path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("solution file is not valid JSON: ") + e.what());
    }

    LoadedSolution ls;
    ls.w0 = num(j, "w0_star", "solution");
    ls.gamma = num(j, "gamma_star", "solution");
    ls.q = num(j, "q_star", "solution");
    ls.Q = num(j, "Q_star", "solution");
    ls.S = num(j, "S_star", "solution");
    ls.x_star = num(j, "x_star", "solution");

    const json& csv_name = member(j, "curve_csv", "solution");
    if (!csv_name.is_string()) bad("solution.curve_csv must be a string");
    fs::path csv = fs::path(json_path).parent_path() / csv_name.get<std::string>();

    std::ifstream cin(csv);
    if (!cin) throw ConfigError("cannot open curve file: " + csv.string());
    std::string header;
    std::getline(cin, header);
    std::vector<double> xs, ws, wps;
    std::string row;
    while (std::getline(cin, row)) {
        if (row.empty()) continue;
        double x, w, wp, mu;
        if (std::sscanf(row.c_str(), "%lg,%lg,%lg,%lg", &x, &w, &wp, &mu) != 4)
            throw ConfigError("malformed curve row: " + row);
        xs.push_back(x);
        ws.push_back(w);
        wps.push_back(wp);
    }
    std::size_t n = xs.size();
    if (n < 5) throw ConfigError("curve file needs at least five samples");

    double dx = xs[1] - xs[0];
    if (!(dx > 0)) throw ConfigError("curve samples must be increasing");
    for (std::size_t i = 0; i + 1 < n; ++i)
        if (std::fabs(xs[i + 1] - xs[i] - dx) > 1e-9 * dx)
            throw ConfigError("curve samples must be uniformly spaced");

    // The slope column must integrate back to the value column; otherwise
    // the file does not describe any differentiable curve and every
    // downstream certificate would be vacuous. The trapezoid mismatch on a
    // clean file is O(dx^2) against the local slope variation, so the bound
    // below is loose for honest data yet catches edits to either column.
    for (std::size_t i = 0; i + 1 < n; ++i) {
        double mismatch =
            std::fabs(ws[i + 1] - ws[i] - 0.5 * dx * (wps[i] + wps[i + 1]));
        // The first term covers curvature kinks, the second the O(dx^3)
        // quadrature error where the slope variation happens to cancel (an
        // inflection of w inside the interval), the third is an absolute
        // floor.
        double tol = 0.25 * dx * std::fabs(wps[i + 1] - wps[i]) +
                     1e-5 * dx * (1.0 + std::fabs(wps[i]) + std::fabs(wps[i + 1])) +
                     1e-12 * (1.0 + std::fabs(ws[i]) + std::fabs(ws[i + 1]));
        if (mismatch > tol) {
            std::ostringstream msg;
            msg << "curve file: slope column disagrees with the sampled "
                   "values near x = "
                << xs[i] << " (mismatch " << mismatch << ", allowed " << tol
                << ")";
            throw ConfigError(msg.str());
        }
    }

    std::vector<CurveNode> nodes(n);
    for (std::size_t i = 0; i < n; ++i) nodes[i] = {xs[i], ws[i], wps[i]};

    ls.curve = SolutionCurve::from_samples(std::move(nodes), ls.w0, ls.gamma);
    return ls;
}

BandPolicy policy_from_loaded(const ProblemSpec& spec, const LoadedSolution& ls) {
    BandPolicy p;
    p.q = ls.q;
    p.Q = ls.Q;
    p.S = ls.S;
    auto curve = std::make_shared<SolutionCurve>(ls.curve);
    p.drift = [curve, menu = spec.menu](double x) {
        return menu.evaluate(curve->value(x)).mu;
    };
    p.validate();
    return p;
}

namespace {

double strict_double(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size() || !std::isfinite(v))
            throw ConfigError("policy: bad number for " + what + ": \"" + s + "\"");
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError("policy: bad number for " + what + ": \"" + s + "\"");
    }
}

} // namespace

BandPolicy parse_policy(const ProblemSpec& spec, const std::string& text,
                        const LoadedSolution* ls) {
    BandPolicy p;
    bool have_q = false, have_Q = false, have_S = false, have_mu = false;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto eq = item.find('=');
        if (eq == std::string::npos)
            throw ConfigError("policy: expected key=value, got \"" + item + "\"");
        std::string key = item.substr(0, eq);
        std::string val = item.substr(eq + 1);
        if (key == "q") {
            p.q = strict_double(val, "q");
            have_q = true;
        } else if (key == "Q") {
            p.Q = strict_double(val, "Q");
            have_Q = true;
        } else if (key == "S") {
            p.S = strict_double(val, "S");
            have_S = true;
        } else if (key == "mu") {
            if (val == "from-solution") {
                if (!ls)
                    throw ConfigError(
                        "policy: mu=from-solution needs a loaded solution "
                        "(pass --from-solution)");
                auto curve = std::make_shared<SolutionCurve>(ls->curve);
                p.drift = [curve, menu = spec.menu](double x) {
                    return menu.evaluate(curve->value(x)).mu;
                };
            } else if (val.rfind("const:", 0) == 0) {
                double mu = strict_double(val.substr(6), "mu");
                p.drift = [mu](double) { return mu; };
            } else {
                throw ConfigError("policy: mu must be const:<value> or from-solution");
            }
            have_mu = true;
        } else {
            throw ConfigError("policy: unknown key \"" + key + "\"");
        }
    }
    if (!have_q || !have_Q || !have_S || !have_mu)
        throw ConfigError("policy: need q=, Q=, S= and mu=");
    p.validate();
    return p;
}

void write_eval(const std::string& dir, const EvalResult& res,
                const BandPolicy& policy, const LoadedConfig& cfg) {
    json j = stamp(cfg);
    j["policy"] = policy_json(policy);
    j["gamma"] = res.gamma;
    j["w0"] = res.w0;
    j["cond"] = res.cond;
    j["r_up"] = res.r_up;
    j["r_down"] = res.r_down;
    dump_to(dir, "eval.json", j);
}

void write_sim(const std::string& dir, const SimReport& rep,
               const BandPolicy& policy, const SimConfig& sim,
               const LoadedConfig& cfg) {
    json j = stamp(cfg);
    j["policy"] = policy_json(policy);
    j["sim"] = sim_json(sim);
    j.update(report_json(rep));
    dump_to(dir, "sim.json", j);
}

void write_certification(const std::string& dir, const CertificationReport& rep,
                         double gamma, const LoadedConfig& cfg) {
    json j = stamp(cfg);
    j["gamma"] = gamma;
    j["passed"] = rep.passed;
    j["min_drift_slack"] = rep.min_drift_slack;
    j["min_up_slack"] = rep.min_up_slack;
    j["min_down_slack"] = rep.min_down_slack;
    j["f_lower_bound"] = rep.f_lower_bound;
    j["w_min"] = rep.w_min;
    j["x_max"] = rep.x_max;
    j["n_grid"] = rep.n_grid;
    json viols = json::array();
    for (const auto& v : rep.violations)
        viols.push_back(json{{"x", v.x}, {"y", v.y}, {"slack", v.slack},
                             {"kind", v.kind}});
    j["violations"] = viols;
    j["tail_note"] = rep.tail_note;
    dump_to(dir, "certification.json", j);
}

void write_sweep(const std::string& dir, const std::vector<SimReport>& reps,
                 const std::vector<BandPolicy>& policies, const SimConfig& sim,
                 const LoadedConfig& cfg) {
    json j = stamp(cfg);
    j["sim"] = sim_json(sim);
    json entries = json::array();
    for (std::size_t i = 0; i < reps.size(); ++i) {
        json e = report_json(reps[i]);
        e["policy"] = policy_json(policies[i]);
        entries.push_back(std::move(e));
    }
    j["entries"] = entries;
    dump_to(dir, "sweep.json", j);
}

} // namespace bandctl::io
