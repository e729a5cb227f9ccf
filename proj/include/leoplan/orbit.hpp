#pragma once

#include <Eigen/Dense>
#include <limits>
#include <vector>

#include "leoplan/constants.hpp"

namespace leoplan {

/// Classical orbital elements. Angles in radians, semi-major axis in km.
/// true_anomaly is a position sample along the orbit, never an optimized
/// quantity.
struct KeplerianElements {
    double a = 0.0;            // semi-major axis, km
    double e = 0.0;            // eccentricity
    double i = 0.0;            // inclination, rad
    double raan = 0.0;         // right ascension of ascending node, rad
    double arg_perigee = 0.0;  // argument of perigee, rad
    double true_anomaly = 0.0; // rad

    double perigee_radius() const { return a * (1.0 - e); }
};

/// Sub-satellite point on the spherical Earth. lon is east-positive and
/// wrapped to (-pi, pi].
struct GroundPoint {
    double lat = 0.0; // rad
    double lon = 0.0; // rad
};

/// Sentinel distance returned when there is nothing to measure against
/// (empty catalog -> no safety constraint).
inline constexpr double kNoConstraint = std::numeric_limits<double>::infinity();

/// Solves Kepler's equation E - e*sin(E) = M for the eccentric anomaly.
/// M is reduced modulo 2*pi; the returned E lies in [0, 2*pi) and satisfies
/// |E - e*sin(E) - M_reduced| < 1e-12. Newton iteration seeded at M
/// (e < 0.8) or pi, with a bisection fallback for the rare stiff cases.
double solve_kepler(double mean_anomaly, double eccentricity);

/// Eccentric anomaly -> true anomaly, quadrant-safe. Result in [0, 2*pi).
double eccentric_to_true(double eccentric_anomaly, double eccentricity);

/// True anomaly -> eccentric anomaly, inverse of the above.
double true_to_eccentric(double true_anomaly, double eccentricity);

/// True anomaly -> mean anomaly (via the eccentric anomaly).
double true_to_mean(double true_anomaly, double eccentricity);

/// Position in the Earth-centered inertial frame for the orbit's geometry
/// evaluated at true anomaly nu (the element set's own true_anomaly is
/// ignored here).
Eigen::Vector3d elements_to_eci(const KeplerianElements& el, double nu);

/// Sub-satellite points at `samples` times uniformly spanning [0, window_s].
/// The Greenwich angle is zero at t = 0; Earth rotation is applied to the
/// longitudes only (spherical Earth).
std::vector<GroundPoint> ground_track(const KeplerianElements& el, double window_s,
                                      int samples, const PhysicalConstants& pc = {});

/// Haversine distance between two points on a sphere of the given radius.
double great_circle_distance(const GroundPoint& p, const GroundPoint& q, double radius_km);

/// Minimum great-circle distance from the orbit's sampled ground track to
/// the target, in km.
double min_ground_distance(const KeplerianElements& el, const GroundPoint& target,
                           double window_s, int samples, const PhysicalConstants& pc = {});

/// ECI positions at `samples` true anomalies uniform in [0, 2*pi).
std::vector<Eigen::Vector3d> sample_orbit_positions(const KeplerianElements& el, int samples);

/// Minimum pairwise Euclidean distance between the orbit and each catalog
/// orbit, both treated as static curves sampled at `samples_per_orbit`
/// true anomalies. Empty catalog -> kNoConstraint.
double min_orbit_distance(const KeplerianElements& el,
                          const std::vector<KeplerianElements>& catalog,
                          int samples_per_orbit);

/// Same, against catalog orbits whose sample clouds were precomputed with
/// sample_orbit_positions (the hot path used by the environment).
double min_orbit_distance(const KeplerianElements& el,
                          const std::vector<std::vector<Eigen::Vector3d>>& catalog_samples,
                          int samples_per_orbit);

} // namespace leoplan
