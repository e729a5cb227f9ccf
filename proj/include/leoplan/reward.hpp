#pragma once

namespace leoplan {

/// Weights of the three mission objectives in the composite reward.
struct RewardWeights {
    double coverage = 2.0;
    double safety = 2.0;
    double target = 2.0;
};

/// One sub-objective's reward/penalty pair.
struct RewardTerm {
    double reward = 0.0;
    double penalty = 0.0;
};

/// Physical inputs of the composite reward.
struct RewardInputs {
    double mean_altitude_km = 0.0;
    double h_min_km = 300.0;
    double h_max_km = 1200.0;
    double d_min_km = 0.0;  // min distance to the closest catalog orbit; may be +inf
    double d_safe_km = 10.0;
    double d_target_km = 0.0;
    double sigma_km = 500.0;
    double eccentricity = 0.0;
    double inclination_rad = 0.0;
    double target_lat_rad = 0.0;
    RewardWeights weights;
};

/// Every sub-term of the composite reward, reported for step info and logs.
struct RewardBreakdown {
    double r_c = 0.0, p_c = 0.0;   // coverage altitude
    double r_s = 0.0, p_s = 0.0;   // safety buffer distance
    double r_t = 0.0, p_t = 0.0;   // ground target validity
    double r_ei = 0.0, p_ei = 0.0; // eccentricity/inclination shaping
    double base = 0.0;
    double bonus = 0.0;
    double penalty = 0.0;
    double final_reward = 0.0; // clipped to [-10, 10]
};

/// Coverage error is the distance from the mean altitude to the band
/// [h_min, h_max] (zero inside). Normalized by the band width; reward
/// 1 - err, penalty err, both clamped to [0, 1].
RewardTerm coverage_reward(double mean_altitude_km, double h_min_km, double h_max_km);

/// tanh-shaped reward of the proximity margin (d_min - d_safe)/d_safe,
/// margin clipped to [-1, 1]. An infinite d_min counts as full margin.
RewardTerm safety_reward(double d_min_km, double d_safe_km);

/// exp(-3 * d_target / sigma); penalty is the complement.
RewardTerm target_reward(double d_target_km, double sigma_km);

/// Gaussian shaping bumps worth 0.5 each: eccentricity around 0.025, and
/// inclination at or above the target latitude (width 0.1 rad below it).
RewardTerm element_shaping(double eccentricity, double inclination_rad, double target_lat_rad);

/// Weighted sum, cubic objective bonus, sharp miss penalty, and the final
/// [-10, 10] clip, assembled from already-computed sub-terms.
RewardBreakdown combine_rewards(const RewardTerm& coverage, const RewardTerm& safety,
                                const RewardTerm& target, const RewardTerm& shaping,
                                const RewardWeights& weights);

/// Full pipeline from physical inputs to the clipped final reward.
RewardBreakdown total_reward(const RewardInputs& in);

} // namespace leoplan
