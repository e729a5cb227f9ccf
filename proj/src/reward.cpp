#include "leoplan/reward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace leoplan {

RewardTerm coverage_reward(double mean_altitude_km, double h_min_km, double h_max_km) {
    double coverage_error = 0.0;
    if (mean_altitude_km < h_min_km) coverage_error = h_min_km - mean_altitude_km;
    else if (mean_altitude_km > h_max_km) coverage_error = mean_altitude_km - h_max_km;

    const double err_n = coverage_error / std::max(1e-6, h_max_km - h_min_km);
    return {std::max(0.0, 1.0 - err_n), std::min(1.0, err_n)};
}

RewardTerm safety_reward(double d_min_km, double d_safe_km) {
    double margin_n = 1.0;
    if (std::isfinite(d_min_km)) {
        margin_n = std::clamp((d_min_km - d_safe_km) / d_safe_km, -1.0, 1.0);
    }
    const double r_s = 0.5 * (std::tanh(margin_n) + 1.0);
    return {r_s, 1.0 - r_s};
}

RewardTerm target_reward(double d_target_km, double sigma_km) {
    const double r_t = std::exp(-3.0 * d_target_km / sigma_km);
    return {r_t, 1.0 - r_t};
}

RewardTerm element_shaping(double eccentricity, double inclination_rad, double target_lat_rad) {
    const double e_dev = (eccentricity - 0.025) / 0.025;
    const double r_e = 0.5 * std::exp(-e_dev * e_dev);

    const double lat = std::abs(target_lat_rad);
    double r_i = 0.5;
    if (inclination_rad < lat) {
        const double i_dev = (lat - inclination_rad) / 0.1;
        r_i = 0.5 * std::exp(-i_dev * i_dev);
    }
    return {r_e + r_i, (0.5 - r_e) + (0.5 - r_i)};
}

RewardBreakdown combine_rewards(const RewardTerm& coverage, const RewardTerm& safety,
                                const RewardTerm& target, const RewardTerm& shaping,
                                const RewardWeights& weights) {
    RewardBreakdown out;
    out.r_c = coverage.reward;
    out.p_c = coverage.penalty;
    out.r_s = safety.reward;
    out.p_s = safety.penalty;
    out.r_t = target.reward;
    out.p_t = target.penalty;
    out.r_ei = shaping.reward;
    out.p_ei = shaping.penalty;

    out.base = weights.coverage * out.r_c + weights.safety * out.r_s +
               weights.target * out.r_t + out.r_ei;

    const double objective_mean = (out.r_s + out.r_t + out.r_c) / 3.0;
    out.bonus = 3.0 * objective_mean * objective_mean * objective_mean;

    const double miss = 1.0 - objective_mean;
    out.penalty = miss * miss * (out.p_s + out.p_c + out.p_t + out.p_ei) / 5.0;

    out.final_reward = std::clamp(out.base + out.bonus - out.penalty, -10.0, 10.0);
    return out;
}

RewardBreakdown total_reward(const RewardInputs& in) {
    return combine_rewards(coverage_reward(in.mean_altitude_km, in.h_min_km, in.h_max_km),
                           safety_reward(in.d_min_km, in.d_safe_km),
                           target_reward(in.d_target_km, in.sigma_km),
                           element_shaping(in.eccentricity, in.inclination_rad, in.target_lat_rad),
                           in.weights);
}

} // namespace leoplan
