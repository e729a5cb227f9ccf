#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "leoplan/mission.hpp"
#include "leoplan/orbit.hpp"
#include "leoplan/reward.hpp"

namespace leoplan {

/// Composite observation: the five elements in physical units plus the
/// three mission-objective bits.
struct Observation {
    KeplerianElements elements;
    bool target_valid = false;
    bool coverage_ok = false;
    bool safety_ok = false;
};

/// Normalized action, one component per optimized element, each in [-1, 1].
using ActionVector = std::array<double, 5>;

struct StepInfo {
    RewardBreakdown breakdown;
    double d_target_km = 0.0;
    double d_min_km = 0.0;
    double mean_altitude_km = 0.0;
    bool all_objectives_met = false;
};

struct StepResult {
    Observation observation;
    double reward = 0.0;
    bool terminated = false;
    bool truncated = false;
    StepInfo info;
};

/// Affine map from the normalized action onto the mission's element box.
/// Components are clamped to [-1, 1] first; true anomaly starts at 0.
KeplerianElements rescale_action(const ActionVector& action, const MissionConfig& cfg);

/// Min-max scales the elements by the mission bounds and appends the flags:
/// (a, e, i, raan, arg_perigee, target_valid, coverage_ok, safety_ok).
std::array<double, 8> flatten_observation(const Observation& obs, const MissionConfig& cfg);

/// The mission MDP. Each episode starts from a uniformly random element
/// set within bounds; an action sets the orbit absolutely; the episode
/// terminates when all three objectives hold and truncates at
/// max_episode_steps. Instances are single-threaded; the shared catalog is
/// immutable.
class MissionEnv {
  public:
    MissionEnv(MissionConfig cfg, std::vector<KeplerianElements> catalog,
               const PhysicalConstants& pc = {});

    /// Seeds the episode generator when a seed is given, otherwise keeps
    /// consuming this instance's stream. Identical seeds yield identical
    /// observations.
    Observation reset(std::optional<std::uint64_t> seed = std::nullopt);

    /// Throws std::logic_error before the first reset.
    StepResult step(const ActionVector& action);

    /// Re-randomizes the orbit from this instance's own rng stream without
    /// touching the seed, and restarts the episode (plateau intervention).
    Observation relocate();

    const MissionConfig& config() const { return cfg_; }
    const KeplerianElements& current_elements() const { return current_; }
    int episode_step() const { return step_count_; }
    long total_steps() const { return total_steps_; } // across all episodes

    /// Objective evaluation for an arbitrary orbit under this mission
    /// (exposed so tests and tools can probe without mutating state).
    StepInfo evaluate_orbit(const KeplerianElements& el) const;

  private:
    KeplerianElements draw_elements();
    Observation observe(const StepInfo& info) const;

    MissionConfig cfg_;
    std::vector<KeplerianElements> catalog_;
    std::vector<std::vector<Eigen::Vector3d>> catalog_samples_;
    PhysicalConstants pc_;
    std::mt19937_64 rng_{0xC0FFEE};
    KeplerianElements current_;
    int step_count_ = 0;
    long total_steps_ = 0;
    bool ready_ = false;
};

} // namespace leoplan
