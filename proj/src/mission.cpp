#include "leoplan/mission.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace leoplan {

void MissionConfig::validate() const {
    const auto fail = [](const std::string& field, const std::string& why) {
        throw ConfigError("mission config field '" + field + "': " + why);
    };
    if (!(std::abs(target.lat) <= kPi / 2.0)) fail("target_lat_deg", "latitude must be within [-90, 90]");
    if (!(sigma_km > 0.0)) fail("sigma_km", "must be > 0");
    if (!(d_safe_km > 0.0)) fail("d_safe_km", "must be > 0");
    if (!(h_min_km < h_max_km)) fail("h_min_km/h_max_km", "h_min must be < h_max");
    if (weights.coverage < 0.0) fail("w_coverage", "must be >= 0");
    if (weights.safety < 0.0) fail("w_safety", "must be >= 0");
    if (weights.target < 0.0) fail("w_target", "must be >= 0");
    const auto check_bounds = [&](const ElementBounds& b, const char* field) {
        if (!(b.lo < b.hi)) fail(field, "lower bound must be < upper bound");
    };
    check_bounds(a_bounds, "a_km");
    check_bounds(e_bounds, "eccentricity");
    check_bounds(i_bounds, "inclination_deg");
    check_bounds(raan_bounds, "raan_deg");
    check_bounds(argp_bounds, "arg_perigee_deg");
    if (e_bounds.lo < 0.0 || e_bounds.hi >= 1.0) fail("eccentricity", "bounds must lie in [0, 1)");
    if (max_episode_steps < 1) fail("max_episode_steps", "must be >= 1");
    if (!(track_window_s > 0.0)) fail("track_window_s", "must be > 0");
    if (track_samples < 2) fail("track_samples", "must be >= 2");
    if (orbit_samples < 8) fail("orbit_samples", "must be >= 8");
}

namespace {

using nlohmann::json;

ElementBounds read_bounds(const json& value, const std::string& key, bool degrees) {
    if (!value.is_array() || value.size() != 2) {
        throw ConfigError("mission config field '" + key + "': expected [low, high]");
    }
    ElementBounds b{value[0].get<double>(), value[1].get<double>()};
    if (degrees) {
        b.lo = deg2rad(b.lo);
        b.hi = deg2rad(b.hi);
    }
    return b;
}

} // namespace

MissionConfig parse_mission_config(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& err) {
        throw ConfigError(std::string("mission config is not valid JSON: ") + err.what());
    }
    if (!doc.is_object()) throw ConfigError("mission config must be a JSON object");

    static const std::set<std::string> known = {
        "target_lat_deg", "target_lon_deg", "sigma_km", "h_min_km", "h_max_km",
        "d_safe_km", "w_coverage", "w_safety", "w_target", "a_km", "eccentricity",
        "inclination_deg", "raan_deg", "arg_perigee_deg", "max_episode_steps",
        "track_window_s", "track_samples", "orbit_samples", "mean_radius_altitude"};
    for (const auto& [key, value] : doc.items()) {
        if (!known.contains(key)) {
            throw ConfigError("mission config: unknown key '" + key + "'");
        }
    }

    MissionConfig cfg;
    const auto get = [&](const char* key, auto& out) {
        if (doc.contains(key)) out = doc[key].template get<std::decay_t<decltype(out)>>();
    };
    double lat_deg = rad2deg(cfg.target.lat), lon_deg = rad2deg(cfg.target.lon);
    get("target_lat_deg", lat_deg);
    get("target_lon_deg", lon_deg);
    cfg.target.lat = deg2rad(lat_deg);
    cfg.target.lon = wrap_pi(deg2rad(lon_deg));
    get("sigma_km", cfg.sigma_km);
    get("h_min_km", cfg.h_min_km);
    get("h_max_km", cfg.h_max_km);
    get("d_safe_km", cfg.d_safe_km);
    get("w_coverage", cfg.weights.coverage);
    get("w_safety", cfg.weights.safety);
    get("w_target", cfg.weights.target);
    if (doc.contains("a_km")) cfg.a_bounds = read_bounds(doc["a_km"], "a_km", false);
    if (doc.contains("eccentricity")) cfg.e_bounds = read_bounds(doc["eccentricity"], "eccentricity", false);
    if (doc.contains("inclination_deg")) cfg.i_bounds = read_bounds(doc["inclination_deg"], "inclination_deg", true);
    if (doc.contains("raan_deg")) cfg.raan_bounds = read_bounds(doc["raan_deg"], "raan_deg", true);
    if (doc.contains("arg_perigee_deg")) cfg.argp_bounds = read_bounds(doc["arg_perigee_deg"], "arg_perigee_deg", true);
    get("max_episode_steps", cfg.max_episode_steps);
    get("track_window_s", cfg.track_window_s);
    get("track_samples", cfg.track_samples);
    get("orbit_samples", cfg.orbit_samples);
    get("mean_radius_altitude", cfg.mean_radius_altitude);

    cfg.validate();
    return cfg;
}

MissionConfig load_mission_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open mission config: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_mission_config(buf.str());
}

std::string mission_config_to_json(const MissionConfig& cfg) {
    nlohmann::ordered_json doc;
    doc["target_lat_deg"] = rad2deg(cfg.target.lat);
    doc["target_lon_deg"] = rad2deg(cfg.target.lon);
    doc["sigma_km"] = cfg.sigma_km;
    doc["h_min_km"] = cfg.h_min_km;
    doc["h_max_km"] = cfg.h_max_km;
    doc["d_safe_km"] = cfg.d_safe_km;
    doc["w_coverage"] = cfg.weights.coverage;
    doc["w_safety"] = cfg.weights.safety;
    doc["w_target"] = cfg.weights.target;
    doc["a_km"] = {cfg.a_bounds.lo, cfg.a_bounds.hi};
    doc["eccentricity"] = {cfg.e_bounds.lo, cfg.e_bounds.hi};
    doc["inclination_deg"] = {rad2deg(cfg.i_bounds.lo), rad2deg(cfg.i_bounds.hi)};
    doc["raan_deg"] = {rad2deg(cfg.raan_bounds.lo), rad2deg(cfg.raan_bounds.hi)};
    doc["arg_perigee_deg"] = {rad2deg(cfg.argp_bounds.lo), rad2deg(cfg.argp_bounds.hi)};
    doc["max_episode_steps"] = cfg.max_episode_steps;
    doc["track_window_s"] = cfg.track_window_s;
    doc["track_samples"] = cfg.track_samples;
    doc["orbit_samples"] = cfg.orbit_samples;
    doc["mean_radius_altitude"] = cfg.mean_radius_altitude;
    return doc.dump(2);
}

} // namespace leoplan
