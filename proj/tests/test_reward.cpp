#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "leoplan/reward.hpp"

using namespace leoplan;

namespace {

// Test-side evaluation of the combination formulas, independent of the
// implementation under test.
double reference_final(double r_c, double r_s, double r_t, double r_ei, double p_c, double p_s,
                       double p_t, double p_ei, const RewardWeights& w) {
    const double base = w.coverage * r_c + w.safety * r_s + w.target * r_t + r_ei;
    const double mean = (r_s + r_t + r_c) / 3.0;
    const double bonus = 3.0 * mean * mean * mean;
    const double penalty = (1.0 - mean) * (1.0 - mean) * (p_s + p_c + p_t + p_ei) / 5.0;
    return std::clamp(base + bonus - penalty, -10.0, 10.0);
}

RewardInputs random_inputs(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    RewardInputs in;
    in.h_min_km = 300.0;
    in.h_max_km = 1200.0;
    in.mean_altitude_km = -500.0 + 4000.0 * unit(rng);
    in.d_safe_km = 1.0 + 99.0 * unit(rng);
    in.d_min_km = (unit(rng) < 0.05) ? std::numeric_limits<double>::infinity()
                                     : 1000.0 * unit(rng);
    in.sigma_km = 50.0 + 1000.0 * unit(rng);
    in.d_target_km = 20000.0 * unit(rng);
    in.eccentricity = unit(rng) * 0.9;
    in.inclination_rad = unit(rng) * 3.1;
    in.target_lat_rad = (unit(rng) - 0.5) * 3.0;
    in.weights = {4.0 * unit(rng), 4.0 * unit(rng), 4.0 * unit(rng)};
    return in;
}

} // namespace

TEST_CASE("coverage_reward inside and outside the band") {
    const auto inside = coverage_reward(700.0, 300.0, 1200.0);
    CHECK(inside.reward == 1.0);
    CHECK(inside.penalty == 0.0);

    const auto at_unit_error = coverage_reward(2100.0, 300.0, 1200.0); // err_n = 900/900
    CHECK(at_unit_error.reward == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(at_unit_error.penalty == doctest::Approx(1.0).epsilon(1e-15));

    const auto half = coverage_reward(1650.0, 300.0, 1200.0); // err_n = 450/900
    CHECK(half.reward == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(half.penalty == doctest::Approx(0.5).epsilon(1e-15));

    const auto below = coverage_reward(-150.0, 300.0, 1200.0); // err = 450 below
    CHECK(below.reward == doctest::Approx(0.5).epsilon(1e-15));

    const auto far = coverage_reward(9000.0, 300.0, 1200.0);
    CHECK(far.reward == 0.0);
    CHECK(far.penalty == 1.0);
}

TEST_CASE("safety_reward tanh shaping") {
    CHECK(safety_reward(10.0, 10.0).reward == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(safety_reward(20.0, 10.0).reward ==
          doctest::Approx(0.8807970779778824).epsilon(1e-9));
    CHECK(safety_reward(0.0, 10.0).reward ==
          doctest::Approx(0.11920292202211757).epsilon(1e-9));
    // Clipped margin: far beyond 2*d_safe saturates at the same value.
    CHECK(safety_reward(1e9, 10.0).reward == safety_reward(20.0, 10.0).reward);
    CHECK(safety_reward(std::numeric_limits<double>::infinity(), 10.0).reward ==
          safety_reward(20.0, 10.0).reward);
    const auto term = safety_reward(7.3, 4.2);
    CHECK(term.reward + term.penalty == 1.0);
}

TEST_CASE("target_reward exponential decay") {
    CHECK(target_reward(0.0, 500.0).reward == 1.0);
    CHECK(target_reward(0.0, 500.0).penalty == 0.0);
    CHECK(target_reward(500.0, 500.0).reward ==
          doctest::Approx(0.049787068367863944).epsilon(1e-12));
    CHECK(target_reward(500.0 / 3.0, 500.0).reward ==
          doctest::Approx(0.36787944117144233).epsilon(1e-12));
    const auto term = target_reward(123.0, 456.0);
    CHECK(term.reward + term.penalty == 1.0);
}

TEST_CASE("element_shaping bumps") {
    const auto peak = element_shaping(0.025, std::abs(-0.4) + 0.1, -0.4);
    CHECK(peak.reward == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(peak.penalty == doctest::Approx(0.0).epsilon(1e-12));

    // Equatorial targets are reachable by any inclination.
    CHECK(element_shaping(0.025, 0.0, 0.0).reward == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(element_shaping(0.025, 2.0, 0.0).reward == doctest::Approx(1.0).epsilon(1e-12));

    const auto off_ecc = element_shaping(0.05, 1.0, 0.2);
    CHECK(off_ecc.reward == doctest::Approx(0.68393972058572117).epsilon(1e-12));

    // Inclination below the target latitude decays with the gap.
    const auto low_inc = element_shaping(0.025, 0.2, 0.5);
    CHECK(low_inc.reward ==
          doctest::Approx(0.5 + 0.5 * std::exp(-9.0)).epsilon(1e-12));
}

TEST_CASE("combine_rewards reaches the clip ceiling on perfect objectives") {
    const RewardBreakdown out =
        combine_rewards({1.0, 0.0}, {1.0, 0.0}, {1.0, 0.0}, {1.0, 0.0}, RewardWeights{});
    CHECK(out.base == 7.0);
    CHECK(out.bonus == 3.0);
    CHECK(out.penalty == 0.0);
    CHECK(out.final_reward == 10.0);
}

TEST_CASE("combine_rewards at the attainable floor") {
    const RewardTerm safety = safety_reward(0.0, 10.0); // r_s floor 0.1192...
    const RewardBreakdown out =
        combine_rewards({0.0, 1.0}, safety, {0.0, 1.0}, {0.0, 1.0}, RewardWeights{});
    const double expected = reference_final(0.0, safety.reward, 0.0, 0.0, 1.0, safety.penalty,
                                            1.0, 1.0, RewardWeights{});
    CHECK(out.final_reward == doctest::Approx(expected).epsilon(1e-15));
    CHECK(out.final_reward == doctest::Approx(-0.47711047090657877).epsilon(1e-12));
}

TEST_CASE("combine_rewards half-objective example") {
    const RewardWeights unit{1.0, 1.0, 1.0};
    const RewardBreakdown out =
        combine_rewards({0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}, {0.0, 1.0}, unit);
    CHECK(out.base == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(out.bonus == doctest::Approx(0.375).epsilon(1e-15));
}

TEST_CASE("total_reward stays within the clip bounds") {
    std::mt19937_64 rng(123);
    for (int i = 0; i < 100000; ++i) {
        const RewardInputs in = random_inputs(rng);
        const RewardBreakdown out = total_reward(in);
        CHECK(out.final_reward >= -10.0);
        CHECK(out.final_reward <= 10.0);
        const double expected = reference_final(out.r_c, out.r_s, out.r_t, out.r_ei, out.p_c,
                                                out.p_s, out.p_t, out.p_ei, in.weights);
        CHECK(out.final_reward == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("target reward decreases strictly with distance") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> d_dist(0.0, 5000.0);
    for (int i = 0; i < 5000; ++i) {
        double d1 = d_dist(rng), d2 = d_dist(rng);
        if (d1 == d2) continue;
        if (d1 > d2) std::swap(d1, d2);
        CHECK(target_reward(d1, 500.0).reward > target_reward(d2, 500.0).reward);
    }
}

TEST_CASE("safety reward is non-decreasing in clearance, strict inside the clip") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> d_dist(0.0, 50.0);
    const double d_safe = 10.0;
    for (int i = 0; i < 5000; ++i) {
        double d1 = d_dist(rng), d2 = d_dist(rng);
        if (d1 > d2) std::swap(d1, d2);
        const double r1 = safety_reward(d1, d_safe).reward;
        const double r2 = safety_reward(d2, d_safe).reward;
        CHECK(r1 <= r2 + 1e-15);
        if (d1 != d2 && d1 > 0.0 && d2 < 2.0 * d_safe) CHECK(r1 < r2);
    }
}

TEST_CASE("coverage reward is 1 exactly when the altitude is in the band") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> alt(-1000.0, 4000.0);
    for (int i = 0; i < 5000; ++i) {
        const double h = alt(rng);
        const bool in_band = h >= 300.0 && h <= 1200.0;
        CHECK((coverage_reward(h, 300.0, 1200.0).reward == 1.0) == in_band);
    }
}

TEST_CASE("bonus is bounded by [0, 3] and maximal only at perfect objectives") {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < 5000; ++i) {
        const double r_c = unit(rng), r_s = unit(rng), r_t = unit(rng);
        const RewardBreakdown out = combine_rewards({r_c, 1.0 - r_c}, {r_s, 1.0 - r_s},
                                                    {r_t, 1.0 - r_t}, {0.5, 0.5}, RewardWeights{});
        CHECK(out.bonus >= 0.0);
        CHECK(out.bonus <= 3.0);
        if (out.bonus == 3.0) {
            CHECK(r_c == 1.0);
            CHECK(r_s == 1.0);
            CHECK(r_t == 1.0);
        }
    }
    CHECK(combine_rewards({1, 0}, {1, 0}, {1, 0}, {0, 1}, RewardWeights{}).bonus == 3.0);
}

TEST_CASE("scaling the weights scales base but not bonus or penalty") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 1000; ++i) {
        RewardInputs in = random_inputs(rng);
        in.weights = {2.0, 2.0, 2.0};
        const RewardBreakdown one = total_reward(in);
        RewardInputs scaled_in = in;
        scaled_in.weights = {6.0, 6.0, 6.0};
        const RewardBreakdown three = total_reward(scaled_in);
        CHECK(three.bonus == one.bonus);
        CHECK(three.penalty == one.penalty);
        const double base_linear = 3.0 * (one.base - one.r_ei) + one.r_ei;
        CHECK(three.base == doctest::Approx(base_linear).epsilon(1e-12));
    }
}
