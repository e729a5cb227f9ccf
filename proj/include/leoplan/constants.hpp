#pragma once

namespace leoplan {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Earth model shared by every geometric computation. Two-body only.
struct PhysicalConstants {
    double mu_earth = 398600.4418;             // km^3/s^2
    double earth_radius = 6371.0;              // km, spherical Earth
    double earth_rotation_rate = 7.2921159e-5; // rad/s
};

constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Wraps an angle into [0, 2*pi).
double wrap_two_pi(double angle);

/// Wraps an angle into (-pi, pi].
double wrap_pi(double angle);

} // namespace leoplan
