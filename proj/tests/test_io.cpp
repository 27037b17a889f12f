#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "bandctl/errors.hpp"
#include "bandctl/evaluate.hpp"
#include "bandctl/free_boundary.hpp"
#include "bandctl/io.hpp"
#include "oracle_helpers.hpp"

using namespace bandctl;
namespace fs = std::filesystem;

namespace {

const char* kCanonicalJson = R"({
  "sigma": 1.0,
  "costs": {"K": 1.0, "k": 0.5, "L": 1.0, "l": 0.5},
  "holding": {"family": "linear", "a": 1.0},
  "drift_menu": {"type": "finite",
                 "entries": [[-1.0, 1.0], [-0.5, 0.25], [0.0, 0.0],
                             [0.5, 0.25], [1.0, 1.0]]},
  "tolerances": {"root_tol": 1e-9, "integrator_tol": 1e-10,
                 "residual_target": 1e-6},
  "sim": {"dt": 1e-3, "horizon": 1e5, "burn_in": 1e3,
          "replications": 32, "seed": 1, "x0": 1.0}
})";

fs::path fresh_dir(const char* name) {
    auto dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("fnv1a matches the published test vectors") {
    CHECK(io::fnv1a("") == 0xcbf29ce484222325ull);
    CHECK(io::fnv1a("a") == 0xaf63dc4c8601ec8cull);
    CHECK(io::fnv1a("foobar") == 0x85944171f73967e8ull);
    CHECK(io::hash_hex(0xcbf29ce484222325ull) == "cbf29ce484222325");
}

TEST_CASE("config parsing round trip") {
    auto cfg = io::parse_config(kCanonicalJson);
    CHECK(cfg.spec.sigma == 1.0);
    CHECK(cfg.spec.K == 1.0);
    CHECK(cfg.spec.k == 0.5);
    CHECK(cfg.spec.L == 1.0);
    CHECK(cfg.spec.l == 0.5);
    CHECK(cfg.spec.h(2.0) == 2.0);
    CHECK(cfg.spec.menu.entries().size() == 5);
    CHECK(cfg.spec.menu.evaluate(1.0).value == doctest::Approx(-0.25));
    CHECK(cfg.solve.root_tol == 1e-9);
    CHECK(cfg.sim.dt == 1e-3);
    CHECK(cfg.sim.replications == 32);
    CHECK(cfg.sim.x0 == 1.0);
    CHECK(cfg.config_hash == io::fnv1a(kCanonicalJson));

    // same text, same hash; different text, different hash
    auto cfg2 = io::parse_config(kCanonicalJson);
    CHECK(cfg2.config_hash == cfg.config_hash);
}

TEST_CASE("holding and drift cost families") {
    auto cfg = io::parse_config(R"({
      "sigma": 2.0,
      "costs": {"K": 1.0, "k": 1.0, "L": 1.0, "l": 1.0},
      "holding": {"family": "power", "a": 2.0, "p": 1.5},
      "drift_menu": {"type": "interval", "lo": -1.0, "hi": 1.0,
                     "cost": {"family": "quadratic", "a": 1.0, "b": 0.0, "d": 0.0}}
    })");
    CHECK(cfg.spec.h(4.0) == doctest::Approx(16.0));
    CHECK(cfg.spec.menu.evaluate(1.0).value == doctest::Approx(-0.25).epsilon(1e-8));

    auto tbl = io::parse_config(R"({
      "sigma": 1.0,
      "costs": {"K": 1.0, "k": 1.0, "L": 1.0, "l": 1.0},
      "holding": {"family": "table", "points": [[0,0],[1,2],[3,4]]},
      "drift_menu": {"type": "interval", "lo": -2.0, "hi": 2.0,
                     "cost": {"family": "absolute", "a": 0.5}}
    })");
    CHECK(tbl.spec.h(2.0) == doctest::Approx(3.0));
    CHECK(tbl.spec.h(5.0) == doctest::Approx(6.0)); // last-segment extrapolation
    // |mu|/2 cost: minimum of mu*w + |mu|/2 at w = 1 is -2 + 1 = -1 at mu = -2
    CHECK(tbl.spec.menu.evaluate(1.0).value == doctest::Approx(-1.0).epsilon(1e-8));

    auto tblcost = io::parse_config(R"({
      "sigma": 1.0,
      "costs": {"K": 1.0, "k": 1.0, "L": 1.0, "l": 1.0},
      "holding": {"family": "linear", "a": 1.0},
      "drift_menu": {"type": "interval", "lo": -1.0, "hi": 1.0,
                     "cost": {"family": "table",
                              "points": [[-1.0, 1.0], [0.0, 0.0], [1.0, 1.0]]}}
    })");
    // piecewise-linear |mu| cost: at w = 2 the best rate is -1
    CHECK(tblcost.spec.menu.evaluate(2.0).value == doctest::Approx(-1.0).epsilon(1e-8));
}

TEST_CASE("malformed configs are rejected") {
    CHECK_THROWS_AS(io::parse_config("not json"), ConfigError);
    CHECK_THROWS_AS(io::parse_config("{}"), ConfigError);
    CHECK_THROWS_AS(io::parse_config(R"({
      "sigma": -1.0,
      "costs": {"K": 1.0, "k": 1.0, "L": 1.0, "l": 1.0},
      "holding": {"family": "linear", "a": 1.0},
      "drift_menu": {"type": "finite", "entries": [[0.0, 0.0]]}
    })"),
                    ConfigError);
    CHECK_THROWS_AS(io::parse_config(R"({
      "sigma": 1.0,
      "costs": {"K": 0.0, "k": 1.0, "L": 1.0, "l": 1.0},
      "holding": {"family": "linear", "a": 1.0},
      "drift_menu": {"type": "finite", "entries": [[0.0, 0.0]]}
    })"),
                    ConfigError);
    CHECK_THROWS_AS(io::parse_config(R"({
      "sigma": 1.0,
      "costs": {"K": 1.0, "k": 1.0, "L": 1.0, "l": 1.0},
      "holding": {"family": "warp", "a": 1.0},
      "drift_menu": {"type": "finite", "entries": [[0.0, 0.0]]}
    })"),
                    ConfigError);
    CHECK_THROWS_AS(io::parse_config(R"({
      "sigma": 1.0,
      "costs": {"K": 1.0, "k": 1.0, "L": 1.0, "l": 1.0},
      "holding": {"family": "table", "points": [[0,0],[1,-1]]},
      "drift_menu": {"type": "finite", "entries": [[0.0, 0.0]]}
    })"),
                    ConfigError);
}

TEST_CASE("policy strings") {
    auto cfg = io::parse_config(kCanonicalJson);
    auto p = io::parse_policy(cfg.spec, "q=0.8,Q=1.2,S=2.5,mu=const:0.5", nullptr);
    CHECK(p.q == 0.8);
    CHECK(p.Q == 1.2);
    CHECK(p.S == 2.5);
    CHECK(p.drift(0.3) == 0.5);
    CHECK_THROWS_AS(io::parse_policy(cfg.spec, "q=0.8,Q=1.2,S=2.5", nullptr),
                    ConfigError);
    CHECK_THROWS_AS(
        io::parse_policy(cfg.spec, "q=0.8,Q=1.2,S=2.5,mu=from-solution", nullptr),
        ConfigError);
    CHECK_THROWS_AS(io::parse_policy(cfg.spec, "q=0.8,Q=1.2,S=2.5,mu=const:zz", nullptr),
                    ConfigError);
}

TEST_CASE("solution artifacts survive a write and reload") {
    auto cfg = io::parse_config(kCanonicalJson);
    auto sol = solve(cfg.spec);
    auto dir = fresh_dir("bandctl_io_test");

    io::write_solution(dir.string(), sol, cfg);
    REQUIRE(fs::exists(dir / "solution.json"));
    REQUIRE(fs::exists(dir / "curve.csv"));

    auto loaded = io::load_solution((dir / "solution.json").string());
    CHECK(loaded.gamma == doctest::Approx(sol.gamma_star).epsilon(1e-12));
    CHECK(loaded.q == doctest::Approx(sol.q_star).epsilon(1e-12));
    CHECK(loaded.Q == doctest::Approx(sol.Q_star).epsilon(1e-12));
    CHECK(loaded.S == doctest::Approx(sol.S_star).epsilon(1e-12));

    // curve values survive the round trip to high accuracy
    for (double x : {0.1, 0.7, 1.9, 2.8})
        CHECK(loaded.curve.value(x) ==
              doctest::Approx(sol.curve.value(x)).epsilon(1e-9));

    // and the reconstructed policy reproduces the solved rate
    auto policy = io::policy_from_loaded(cfg.spec, loaded);
    auto res = evaluate_band_policy(cfg.spec, policy);
    CHECK(res.gamma == doctest::Approx(sol.gamma_star).epsilon(1e-7));

    fs::remove_all(dir);
}
