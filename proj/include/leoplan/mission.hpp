#pragma once

#include <stdexcept>
#include <string>

#include "leoplan/constants.hpp"
#include "leoplan/orbit.hpp"
#include "leoplan/reward.hpp"

namespace leoplan {

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct ElementBounds {
    double lo = 0.0;
    double hi = 0.0;
};

/// Mission definition: the ground target, objective thresholds, reward
/// weights, and the element box the agent acts in. Angles are stored in
/// radians; configuration files speak degrees and are converted at the
/// boundary.
struct MissionConfig {
    GroundPoint target{deg2rad(28.5), deg2rad(-80.6)};
    double sigma_km = 500.0;
    double h_min_km = 300.0;
    double h_max_km = 1200.0;
    double d_safe_km = 10.0;
    RewardWeights weights;

    ElementBounds a_bounds{6700.0, 7500.0};
    ElementBounds e_bounds{0.0, 0.05};
    ElementBounds i_bounds{0.0, deg2rad(100.0)};
    ElementBounds raan_bounds{0.0, kTwoPi};
    ElementBounds argp_bounds{0.0, kTwoPi};

    int max_episode_steps = 32;
    double track_window_s = 86400.0;
    int track_samples = 2000;
    int orbit_samples = 256;

    // Mean altitude a*(1 + e^2/2) - R_E by default; plain a - R_E when off.
    bool mean_radius_altitude = true;

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

/// Loads a mission from a JSON file. Every field is optional and defaults
/// to the values above; unknown keys are rejected by name. Angular fields
/// (target coordinates, inclination/RAAN/perigee bounds) are given in
/// degrees.
MissionConfig load_mission_config(const std::string& path);
MissionConfig parse_mission_config(const std::string& json_text);

/// Inverse of the file loader, used to snapshot a mission into a manifest.
std::string mission_config_to_json(const MissionConfig& cfg);

} // namespace leoplan
