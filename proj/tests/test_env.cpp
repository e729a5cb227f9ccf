#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "leoplan/env.hpp"
#include "leoplan/mission.hpp"

using namespace leoplan;

namespace {

// Cheap mission for sweep tests: coarse sampling, short episodes.
MissionConfig quick_mission() {
    MissionConfig cfg;
    cfg.track_samples = 128;
    cfg.orbit_samples = 32;
    cfg.max_episode_steps = 4;
    return cfg;
}

KeplerianElements leo_orbit(double a, double i) {
    KeplerianElements el;
    el.a = a;
    el.e = 0.001;
    el.i = i;
    return el;
}

} // namespace

TEST_CASE("mission config defaults validate and carry the LEO bounds") {
    MissionConfig cfg;
    cfg.validate();
    CHECK(cfg.a_bounds.lo == 6700.0);
    CHECK(cfg.a_bounds.hi == 7500.0);
    CHECK(cfg.e_bounds.hi == 0.05);
    CHECK(cfg.i_bounds.hi == doctest::Approx(deg2rad(100.0)));
    CHECK(cfg.raan_bounds.hi == doctest::Approx(kTwoPi));
    CHECK(cfg.target.lat == doctest::Approx(deg2rad(28.5)));
    CHECK(cfg.target.lon == doctest::Approx(deg2rad(-80.6)));
    CHECK(cfg.weights.coverage == 2.0);
}

TEST_CASE("mission config json round trip and degree conversion") {
    const MissionConfig cfg = parse_mission_config(R"({
        "target_lat_deg": -10.0,
        "target_lon_deg": 190.0,
        "sigma_km": 250.0,
        "inclination_deg": [10.0, 95.0],
        "track_samples": 500
    })");
    CHECK(cfg.target.lat == doctest::Approx(deg2rad(-10.0)));
    CHECK(cfg.target.lon == doctest::Approx(deg2rad(-170.0))); // wrapped
    CHECK(cfg.sigma_km == 250.0);
    CHECK(cfg.i_bounds.lo == doctest::Approx(deg2rad(10.0)));
    CHECK(cfg.i_bounds.hi == doctest::Approx(deg2rad(95.0)));
    CHECK(cfg.track_samples == 500);
    CHECK(cfg.h_min_km == 300.0); // untouched default

    const MissionConfig back = parse_mission_config(mission_config_to_json(cfg));
    CHECK(back.target.lat == doctest::Approx(cfg.target.lat));
    CHECK(back.i_bounds.hi == doctest::Approx(cfg.i_bounds.hi));
}

TEST_CASE("mission config rejects unknown keys by name") {
    try {
        parse_mission_config(R"({"sigma_km": 100.0, "sigma": 5})");
        CHECK(false);
    } catch (const ConfigError& err) {
        CHECK(std::string(err.what()).find("'sigma'") != std::string::npos);
    }
}

TEST_CASE("mission config names the offending field") {
    try {
        parse_mission_config(R"({"h_min_km": 2000.0})");
        CHECK(false);
    } catch (const ConfigError& err) {
        CHECK(std::string(err.what()).find("h_min") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_mission_config(R"({"sigma_km": -1.0})"), ConfigError);
    CHECK_THROWS_AS(parse_mission_config(R"({"a_km": [7500, 6700]})"), ConfigError);
    CHECK_THROWS_AS(parse_mission_config("not json"), ConfigError);
    CHECK_THROWS_AS(load_mission_config("/nonexistent/mission.json"), ConfigError);
}

TEST_CASE("rescale_action maps corners and midpoint") {
    const MissionConfig cfg;
    const KeplerianElements lows = rescale_action({-1, -1, -1, -1, -1}, cfg);
    CHECK(lows.a == 6700.0);
    CHECK(lows.e == 0.0);
    CHECK(lows.i == 0.0);
    CHECK(lows.raan == 0.0);
    CHECK(lows.arg_perigee == 0.0);
    CHECK(lows.true_anomaly == 0.0);

    const KeplerianElements highs = rescale_action({1, 1, 1, 1, 1}, cfg);
    CHECK(highs.a == 7500.0);
    CHECK(highs.e == 0.05);
    CHECK(highs.i == doctest::Approx(deg2rad(100.0)));
    CHECK(highs.raan == doctest::Approx(kTwoPi));

    const KeplerianElements mid = rescale_action({0, 0, 0, 0, 0}, cfg);
    CHECK(mid.a == doctest::Approx(7100.0));
    CHECK(mid.e == doctest::Approx(0.025));
    CHECK(mid.i == doctest::Approx(deg2rad(50.0)));

    // Out-of-range components clamp before rescaling.
    const KeplerianElements clamped = rescale_action({-3.0, 7.0, 0, 0, 0}, cfg);
    CHECK(clamped.a == 6700.0);
    CHECK(clamped.e == 0.05);
}

TEST_CASE("flatten_observation scales elements and appends flags") {
    const MissionConfig cfg;
    Observation obs;
    obs.elements = rescale_action({-1, -1, -1, -1, -1}, cfg);
    auto flat = flatten_observation(obs, cfg);
    for (double v : flat) CHECK(v == 0.0);

    obs.elements = rescale_action({1, 1, 1, 1, 1}, cfg);
    obs.target_valid = obs.coverage_ok = obs.safety_ok = true;
    flat = flatten_observation(obs, cfg);
    for (double v : flat) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));

    obs.elements = rescale_action({0, 0, 0, 0, 0}, cfg);
    flat = flatten_observation(obs, cfg);
    for (int k = 0; k < 5; ++k) CHECK(flat[static_cast<std::size_t>(k)] == doctest::Approx(0.5));
}

TEST_CASE("flatten_observation is invertible on the element block") {
    const MissionConfig cfg;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        Observation obs;
        obs.elements = rescale_action({unit(rng), unit(rng), unit(rng), unit(rng), unit(rng)}, cfg);
        const auto flat = flatten_observation(obs, cfg);
        const auto unscale = [](double v, const ElementBounds& b) {
            return b.lo + v * (b.hi - b.lo);
        };
        CHECK(unscale(flat[0], cfg.a_bounds) == doctest::Approx(obs.elements.a).epsilon(1e-12));
        CHECK(unscale(flat[1], cfg.e_bounds) == doctest::Approx(obs.elements.e).epsilon(1e-12));
        CHECK(unscale(flat[2], cfg.i_bounds) == doctest::Approx(obs.elements.i).epsilon(1e-12));
        CHECK(unscale(flat[3], cfg.raan_bounds) ==
              doctest::Approx(obs.elements.raan).epsilon(1e-12));
        CHECK(unscale(flat[4], cfg.argp_bounds) ==
              doctest::Approx(obs.elements.arg_perigee).epsilon(1e-12));
    }
}

TEST_CASE("reset is deterministic per seed and respects bounds") {
    MissionEnv env(quick_mission(), {});
    const Observation a = env.reset(42);
    MissionEnv env2(quick_mission(), {});
    const Observation b = env2.reset(42);
    CHECK(a.elements.a == b.elements.a);
    CHECK(a.elements.e == b.elements.e);
    CHECK(a.elements.i == b.elements.i);
    CHECK(a.elements.raan == b.elements.raan);
    CHECK(a.elements.arg_perigee == b.elements.arg_perigee);

    const MissionConfig& cfg = env.config();
    const PhysicalConstants pc;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const Observation obs = env.reset(seed);
        CHECK(obs.elements.a >= cfg.a_bounds.lo);
        CHECK(obs.elements.a <= cfg.a_bounds.hi);
        CHECK(obs.elements.e >= cfg.e_bounds.lo);
        CHECK(obs.elements.e <= cfg.e_bounds.hi);
        CHECK(obs.elements.i >= cfg.i_bounds.lo);
        CHECK(obs.elements.i <= cfg.i_bounds.hi);
        CHECK(obs.elements.perigee_radius() - pc.earth_radius > 0.0);
    }
}

TEST_CASE("reset sampling spans the semi-major-axis range") {
    MissionEnv env(quick_mission(), {});
    env.reset(7);
    double lo = 1e18, hi = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Observation obs = env.reset();
        lo = std::min(lo, obs.elements.a);
        hi = std::max(hi, obs.elements.a);
    }
    CHECK(hi - lo > 0.9 * 800.0);
}

TEST_CASE("step before reset throws") {
    MissionEnv env(quick_mission(), {});
    CHECK_THROWS_AS(env.step({0, 0, 0, 0, 0}), std::logic_error);
}

TEST_CASE("a reachable mission terminates with all objectives met") {
    MissionConfig cfg = quick_mission();
    cfg.target = {0.0, 0.0}; // equatorial target
    cfg.track_samples = 2000;
    MissionEnv env(cfg, {});
    env.reset(1);
    // Equatorial orbit: the track passes over every equatorial longitude.
    const StepResult sr = env.step({0.0, 0.0, -1.0, 0.0, 0.0});
    CHECK(sr.info.d_target_km <= cfg.sigma_km);
    CHECK(std::isinf(sr.info.d_min_km));
    CHECK(sr.observation.target_valid);
    CHECK(sr.observation.coverage_ok);
    CHECK(sr.observation.safety_ok);
    CHECK(sr.info.all_objectives_met);
    CHECK(sr.terminated);
    CHECK(!sr.truncated);
    CHECK(sr.reward > 5.0);
}

TEST_CASE("an unreachable target truncates at the episode cap") {
    MissionConfig cfg = quick_mission();
    cfg.target = {deg2rad(80.0), 0.0};
    MissionEnv env(cfg, {});
    env.reset(3);
    StepResult sr;
    for (int k = 0; k < cfg.max_episode_steps; ++k) {
        sr = env.step({0.0, 0.0, -1.0, 0.0, 0.0}); // equatorial orbit, far from 80N
        CHECK(!sr.terminated);
        CHECK(sr.truncated == (k == cfg.max_episode_steps - 1));
    }
    CHECK(!sr.info.all_objectives_met);
    CHECK(env.episode_step() == cfg.max_episode_steps);
}

TEST_CASE("terminated implies every objective bit in the same result") {
    MissionConfig cfg = quick_mission();
    MissionEnv env(cfg, {leo_orbit(6792.0, 0.9)});
    env.reset(11);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (int i = 0; i < 300; ++i) {
        const StepResult sr =
            env.step({unit(rng), unit(rng), unit(rng), unit(rng), unit(rng)});
        if (sr.terminated) {
            CHECK(sr.observation.target_valid);
            CHECK(sr.observation.coverage_ok);
            CHECK(sr.observation.safety_ok);
        }
        if (sr.terminated || sr.truncated) env.reset();
    }
}

TEST_CASE("reward stays within the clip bounds for random actions") {
    MissionConfig cfg = quick_mission();
    cfg.track_samples = 64;
    cfg.orbit_samples = 16;
    MissionEnv env(cfg, {leo_orbit(6792.0, 0.9), leo_orbit(7200.0, 1.4)});
    env.reset(2);
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> wide(-1.5, 1.5);
    for (int i = 0; i < 10000; ++i) {
        const StepResult sr =
            env.step({wide(rng), wide(rng), wide(rng), wide(rng), wide(rng)});
        CHECK(sr.reward >= -10.0);
        CHECK(sr.reward <= 10.0);
        if (sr.terminated || sr.truncated) env.reset();
    }
}

TEST_CASE("trajectories are deterministic functions of seed and actions") {
    MissionConfig cfg = quick_mission();
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<ActionVector> actions;
    for (int i = 0; i < 24; ++i) {
        actions.push_back({unit(rng), unit(rng), unit(rng), unit(rng), unit(rng)});
    }

    const auto run = [&](MissionEnv& env) {
        std::vector<double> rewards;
        env.reset(77);
        for (const ActionVector& act : actions) {
            const StepResult sr = env.step(act);
            rewards.push_back(sr.reward);
            if (sr.terminated || sr.truncated) env.reset();
        }
        return rewards;
    };

    MissionEnv env1(cfg, {leo_orbit(6792.0, 0.9)});
    MissionEnv env2(cfg, {leo_orbit(6792.0, 0.9)});
    const auto r1 = run(env1);
    const auto r2 = run(env2);
    for (std::size_t i = 0; i < r1.size(); ++i) CHECK(r1[i] == r2[i]);
}

TEST_CASE("relocate draws a fresh orbit and restarts the episode") {
    MissionEnv env(quick_mission(), {});
    env.reset(10);
    env.step({0, 0, 0, 0, 0});
    int changed = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const double before = env.current_elements().a;
        env.relocate();
        if (env.current_elements().a != before) ++changed;
        CHECK(env.episode_step() == 0);
    }
    CHECK(changed >= 99);
}

TEST_CASE("perigee stays above ground even at the hostile action corner") {
    const MissionConfig cfg = quick_mission();
    MissionEnv env(cfg, {});
    env.reset(4);
    // Low a with max e would dip the perigee below ground without the clamp.
    const StepResult sr = env.step({-1.0, 1.0, 0.0, 0.0, 0.0});
    const PhysicalConstants pc;
    CHECK(env.current_elements().perigee_radius() - pc.earth_radius >= 1.0 - 1e-9);
    CHECK(env.current_elements().e < 0.05);
    CHECK(sr.reward >= -10.0);
}

TEST_CASE("mean altitude switch changes the coverage input") {
    MissionConfig cfg = quick_mission();
    cfg.mean_radius_altitude = true;
    MissionEnv with_term(cfg, {});
    cfg.mean_radius_altitude = false;
    MissionEnv without_term(cfg, {});
    with_term.reset(5);
    without_term.reset(5);
    const ActionVector act{0.5, 1.0, 0.3, -0.2, 0.1};
    const StepResult a = with_term.step(act);
    const StepResult b = without_term.step(act);
    const double e = with_term.current_elements().e;
    const double expected_gap = with_term.current_elements().a * 0.5 * e * e;
    CHECK(a.info.mean_altitude_km - b.info.mean_altitude_km ==
          doctest::Approx(expected_gap).epsilon(1e-9));
}
