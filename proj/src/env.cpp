#include "leoplan/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace leoplan {

namespace {

// Smallest perigee altitude the simulation accepts, km.
constexpr double kMinPerigeeAltitude = 1.0;

double max_safe_eccentricity(double a, double earth_radius) {
    return std::max(0.0, 1.0 - (earth_radius + kMinPerigeeAltitude) / a);
}

double mean_altitude(const KeplerianElements& el, const MissionConfig& cfg, double earth_radius) {
    if (cfg.mean_radius_altitude) {
        return el.a * (1.0 + 0.5 * el.e * el.e) - earth_radius;
    }
    return el.a - earth_radius;
}

} // namespace

KeplerianElements rescale_action(const ActionVector& action, const MissionConfig& cfg) {
    const auto affine = [](double component, const ElementBounds& b) {
        const double t = 0.5 * (std::clamp(component, -1.0, 1.0) + 1.0);
        return b.lo + t * (b.hi - b.lo);
    };
    KeplerianElements el;
    el.a = affine(action[0], cfg.a_bounds);
    el.e = affine(action[1], cfg.e_bounds);
    el.i = affine(action[2], cfg.i_bounds);
    el.raan = affine(action[3], cfg.raan_bounds);
    el.arg_perigee = affine(action[4], cfg.argp_bounds);
    el.true_anomaly = 0.0;
    return el;
}

std::array<double, 8> flatten_observation(const Observation& obs, const MissionConfig& cfg) {
    const auto scale = [](double value, const ElementBounds& b) {
        return (value - b.lo) / (b.hi - b.lo);
    };
    return {scale(obs.elements.a, cfg.a_bounds),
            scale(obs.elements.e, cfg.e_bounds),
            scale(obs.elements.i, cfg.i_bounds),
            scale(obs.elements.raan, cfg.raan_bounds),
            scale(obs.elements.arg_perigee, cfg.argp_bounds),
            obs.target_valid ? 1.0 : 0.0,
            obs.coverage_ok ? 1.0 : 0.0,
            obs.safety_ok ? 1.0 : 0.0};
}

MissionEnv::MissionEnv(MissionConfig cfg, std::vector<KeplerianElements> catalog,
                       const PhysicalConstants& pc)
    : cfg_(std::move(cfg)), catalog_(std::move(catalog)), pc_(pc) {
    cfg_.validate();
    catalog_samples_.reserve(catalog_.size());
    for (const KeplerianElements& el : catalog_) {
        catalog_samples_.push_back(sample_orbit_positions(el, cfg_.orbit_samples));
    }
}

StepInfo MissionEnv::evaluate_orbit(const KeplerianElements& el) const {
    StepInfo info;
    info.mean_altitude_km = mean_altitude(el, cfg_, pc_.earth_radius);
    info.d_target_km =
        min_ground_distance(el, cfg_.target, cfg_.track_window_s, cfg_.track_samples, pc_);
    info.d_min_km = min_orbit_distance(el, catalog_samples_, cfg_.orbit_samples);

    RewardInputs in;
    in.mean_altitude_km = info.mean_altitude_km;
    in.h_min_km = cfg_.h_min_km;
    in.h_max_km = cfg_.h_max_km;
    in.d_min_km = info.d_min_km;
    in.d_safe_km = cfg_.d_safe_km;
    in.d_target_km = info.d_target_km;
    in.sigma_km = cfg_.sigma_km;
    in.eccentricity = el.e;
    in.inclination_rad = el.i;
    in.target_lat_rad = cfg_.target.lat;
    in.weights = cfg_.weights;
    info.breakdown = total_reward(in);

    const bool target_valid = info.d_target_km <= cfg_.sigma_km;
    const bool coverage_ok =
        info.mean_altitude_km >= cfg_.h_min_km && info.mean_altitude_km <= cfg_.h_max_km;
    const bool safety_ok = info.d_min_km >= cfg_.d_safe_km;
    info.all_objectives_met = target_valid && coverage_ok && safety_ok;
    return info;
}

Observation MissionEnv::observe(const StepInfo& info) const {
    Observation obs;
    obs.elements = current_;
    obs.target_valid = info.d_target_km <= cfg_.sigma_km;
    obs.coverage_ok =
        info.mean_altitude_km >= cfg_.h_min_km && info.mean_altitude_km <= cfg_.h_max_km;
    obs.safety_ok = info.d_min_km >= cfg_.d_safe_km;
    return obs;
}

KeplerianElements MissionEnv::draw_elements() {
    const auto uniform = [this](const ElementBounds& b) {
        return std::uniform_real_distribution<double>(b.lo, b.hi)(rng_);
    };
    // Rejection keeps the draw uniform over the valid (perigee above
    // ground) part of the box; the invalid corner is tiny.
    for (;;) {
        KeplerianElements el;
        el.a = uniform(cfg_.a_bounds);
        el.e = uniform(cfg_.e_bounds);
        el.i = uniform(cfg_.i_bounds);
        el.raan = uniform(cfg_.raan_bounds);
        el.arg_perigee = uniform(cfg_.argp_bounds);
        el.true_anomaly = 0.0;
        if (el.perigee_radius() - pc_.earth_radius >= kMinPerigeeAltitude) return el;
    }
}

Observation MissionEnv::reset(std::optional<std::uint64_t> seed) {
    if (seed) rng_.seed(*seed);
    current_ = draw_elements();
    step_count_ = 0;
    ready_ = true;
    return observe(evaluate_orbit(current_));
}

Observation MissionEnv::relocate() {
    if (!ready_) throw std::logic_error("relocate() before reset()");
    current_ = draw_elements();
    step_count_ = 0;
    return observe(evaluate_orbit(current_));
}

StepResult MissionEnv::step(const ActionVector& action) {
    if (!ready_) throw std::logic_error("step() before reset()");

    KeplerianElements orbit = rescale_action(action, cfg_);
    orbit.e = std::min(orbit.e, max_safe_eccentricity(orbit.a, pc_.earth_radius));
    current_ = orbit;
    ++step_count_;
    ++total_steps_;

    StepResult result;
    result.info = evaluate_orbit(orbit);
    result.observation = observe(result.info);
    result.reward = result.info.breakdown.final_reward;
    result.terminated = result.info.all_objectives_met;
    result.truncated = step_count_ >= cfg_.max_episode_steps;
    return result;
}

} // namespace leoplan
