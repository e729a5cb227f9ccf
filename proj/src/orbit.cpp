#include "leoplan/orbit.hpp"

#include <cmath>

namespace leoplan {

double wrap_two_pi(double angle) {
    double w = std::fmod(angle, kTwoPi);
    if (w < 0.0) w += kTwoPi;
    return w;
}

double wrap_pi(double angle) {
    double w = wrap_two_pi(angle);
    if (w > kPi) w -= kTwoPi;
    return w;
}

double solve_kepler(double mean_anomaly, double eccentricity) {
    const double e = eccentricity;
    const double m = wrap_two_pi(mean_anomaly);
    if (e == 0.0) return m;

    double ecc_anom = (e < 0.8) ? m : kPi;
    for (int iter = 0; iter < 50; ++iter) {
        const double f = ecc_anom - e * std::sin(ecc_anom) - m;
        if (std::abs(f) < 1e-13) return ecc_anom;
        ecc_anom -= f / (1.0 - e * std::cos(ecc_anom));
    }

    // Newton failed to settle; fall back to bisection. E - e*sin(E) is
    // strictly increasing and |E - M| <= e, so [m - e, m + e] brackets the
    // root.
    double lo = m - e, hi = m + e;
    for (int iter = 0; iter < 80; ++iter) {
        ecc_anom = 0.5 * (lo + hi);
        const double f = ecc_anom - e * std::sin(ecc_anom) - m;
        if (f > 0.0) hi = ecc_anom;
        else lo = ecc_anom;
    }
    // Two polishing Newton steps push the residual to machine level.
    for (int iter = 0; iter < 2; ++iter) {
        const double f = ecc_anom - e * std::sin(ecc_anom) - m;
        ecc_anom -= f / (1.0 - e * std::cos(ecc_anom));
    }
    return ecc_anom;
}

double eccentric_to_true(double eccentric_anomaly, double eccentricity) {
    const double half = 0.5 * eccentric_anomaly;
    const double s = std::sqrt(1.0 + eccentricity) * std::sin(half);
    const double c = std::sqrt(1.0 - eccentricity) * std::cos(half);
    return wrap_two_pi(2.0 * std::atan2(s, c));
}

double true_to_eccentric(double true_anomaly, double eccentricity) {
    const double half = 0.5 * true_anomaly;
    const double s = std::sqrt(1.0 - eccentricity) * std::sin(half);
    const double c = std::sqrt(1.0 + eccentricity) * std::cos(half);
    return wrap_two_pi(2.0 * std::atan2(s, c));
}

double true_to_mean(double true_anomaly, double eccentricity) {
    const double ecc_anom = true_to_eccentric(true_anomaly, eccentricity);
    return wrap_two_pi(ecc_anom - eccentricity * std::sin(ecc_anom));
}

namespace {

// Perifocal -> ECI rotation, R3(-raan) * R1(-i) * R3(-argp).
Eigen::Matrix3d perifocal_to_eci(const KeplerianElements& el) {
    const double cr = std::cos(el.raan), sr = std::sin(el.raan);
    const double ci = std::cos(el.i), si = std::sin(el.i);
    const double cw = std::cos(el.arg_perigee), sw = std::sin(el.arg_perigee);
    Eigen::Matrix3d rot;
    rot << cr * cw - sr * sw * ci, -cr * sw - sr * cw * ci, sr * si,
           sr * cw + cr * sw * ci, -sr * sw + cr * cw * ci, -cr * si,
           sw * si,                 cw * si,                 ci;
    return rot;
}

Eigen::Vector3d eci_at(const Eigen::Matrix3d& rot, const KeplerianElements& el, double nu) {
    const double r = el.a * (1.0 - el.e * el.e) / (1.0 + el.e * std::cos(nu));
    return rot * Eigen::Vector3d(r * std::cos(nu), r * std::sin(nu), 0.0);
}

} // namespace

Eigen::Vector3d elements_to_eci(const KeplerianElements& el, double nu) {
    return eci_at(perifocal_to_eci(el), el, nu);
}

std::vector<GroundPoint> ground_track(const KeplerianElements& el, double window_s,
                                      int samples, const PhysicalConstants& pc) {
    const Eigen::Matrix3d rot = perifocal_to_eci(el);
    const double mean_motion = std::sqrt(pc.mu_earth / (el.a * el.a * el.a)); // rad/s
    const double m0 = true_to_mean(el.true_anomaly, el.e);

    std::vector<GroundPoint> track;
    track.reserve(static_cast<std::size_t>(samples));
    for (int k = 0; k < samples; ++k) {
        const double t = window_s * static_cast<double>(k) / static_cast<double>(samples - 1);
        const double nu = eccentric_to_true(solve_kepler(m0 + mean_motion * t, el.e), el.e);
        const Eigen::Vector3d pos = eci_at(rot, el, nu);
        const double r = pos.norm();
        GroundPoint gp;
        gp.lat = std::asin(pos.z() / r);
        gp.lon = wrap_pi(std::atan2(pos.y(), pos.x()) - pc.earth_rotation_rate * t);
        track.push_back(gp);
    }
    return track;
}

double great_circle_distance(const GroundPoint& p, const GroundPoint& q, double radius_km) {
    const double dlat = 0.5 * (q.lat - p.lat);
    const double dlon = 0.5 * (q.lon - p.lon);
    const double h = std::sin(dlat) * std::sin(dlat) +
                     std::cos(p.lat) * std::cos(q.lat) * std::sin(dlon) * std::sin(dlon);
    return 2.0 * radius_km * std::asin(std::min(1.0, std::sqrt(h)));
}

double min_ground_distance(const KeplerianElements& el, const GroundPoint& target,
                           double window_s, int samples, const PhysicalConstants& pc) {
    double best = std::numeric_limits<double>::infinity();
    for (const GroundPoint& gp : ground_track(el, window_s, samples, pc)) {
        best = std::min(best, great_circle_distance(gp, target, pc.earth_radius));
    }
    return best;
}

std::vector<Eigen::Vector3d> sample_orbit_positions(const KeplerianElements& el, int samples) {
    const Eigen::Matrix3d rot = perifocal_to_eci(el);
    std::vector<Eigen::Vector3d> positions;
    positions.reserve(static_cast<std::size_t>(samples));
    for (int k = 0; k < samples; ++k) {
        const double nu = kTwoPi * static_cast<double>(k) / static_cast<double>(samples);
        positions.push_back(eci_at(rot, el, nu));
    }
    return positions;
}

double min_orbit_distance(const KeplerianElements& el,
                          const std::vector<std::vector<Eigen::Vector3d>>& catalog_samples,
                          int samples_per_orbit) {
    if (catalog_samples.empty()) return kNoConstraint;
    const std::vector<Eigen::Vector3d> own = sample_orbit_positions(el, samples_per_orbit);
    double best_sq = std::numeric_limits<double>::infinity();
    for (const auto& other : catalog_samples) {
        for (const Eigen::Vector3d& p : own) {
            for (const Eigen::Vector3d& q : other) {
                best_sq = std::min(best_sq, (p - q).squaredNorm());
            }
        }
    }
    return std::sqrt(best_sq);
}

double min_orbit_distance(const KeplerianElements& el,
                          const std::vector<KeplerianElements>& catalog,
                          int samples_per_orbit) {
    std::vector<std::vector<Eigen::Vector3d>> clouds;
    clouds.reserve(catalog.size());
    for (const KeplerianElements& other : catalog) {
        clouds.push_back(sample_orbit_positions(other, samples_per_orbit));
    }
    return min_orbit_distance(el, clouds, samples_per_orbit);
}

} // namespace leoplan
