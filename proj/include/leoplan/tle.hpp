#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "leoplan/constants.hpp"
#include "leoplan/orbit.hpp"

namespace leoplan {

/// One parsed two-line element set. Drag-related fields (mean_motion_dot,
/// mean_motion_ddot, bstar) are parsed for completeness but never used in
/// any dynamics. The source lines are retained so a catalog can be written
/// back losslessly.
struct TleRecord {
    std::string name;
    int catalog_number = 0;
    std::string intl_designator;
    double epoch = 0.0; // as printed: 2-digit year + fractional day of year
    double mean_motion_dot = 0.0;  // rev/day^2
    double mean_motion_ddot = 0.0; // rev/day^3
    double bstar = 0.0;            // 1/earth radii
    double inclination_deg = 0.0;
    double raan_deg = 0.0;
    double eccentricity = 0.0;
    double arg_perigee_deg = 0.0;
    double mean_anomaly_deg = 0.0;
    double mean_motion = 0.0; // rev/day
    long rev_at_epoch = 0;
    int checksum1 = 0;
    int checksum2 = 0;
    std::string line1; // verbatim source
    std::string line2;
};

enum class TleErrorKind {
    LineIdentifier,
    MalformedField,
    ChecksumMismatch,
    NonPositiveMeanMotion,
};

class TleParseError : public std::runtime_error {
  public:
    TleParseError(TleErrorKind kind, int line_in_group, std::string message)
        : std::runtime_error(std::move(message)), kind_(kind), line_in_group_(line_in_group) {}

    TleErrorKind kind() const { return kind_; }
    int line_in_group() const { return line_in_group_; } // 1 or 2, 0 = n/a

  private:
    TleErrorKind kind_;
    int line_in_group_;
};

/// NORAD line checksum: sum of digit characters plus one per '-' over the
/// first 68 columns, modulo 10. Other characters contribute nothing.
int checksum(std::string_view line);

/// Parses a TLE group per the standard NORAD fixed-width layout and
/// verifies both line checksums. The name line is optional; the name
/// defaults to the catalog number when absent.
TleRecord parse_tle(const std::optional<std::string>& name_line,
                    const std::string& line1, const std::string& line2);

/// Semi-major axis in km from mean motion in rev/day: cbrt(mu / n^2) with
/// n converted to rad/s. Throws TleParseError(NonPositiveMeanMotion) for
/// n <= 0.
double mean_motion_to_sma(double mean_motion_rev_day, const PhysicalConstants& pc = {});

/// Converts a record to Keplerian elements: degrees to radians, a from the
/// mean motion, true anomaly from the mean anomaly via Kepler's equation.
KeplerianElements tle_to_elements(const TleRecord& record, const PhysicalConstants& pc = {});

struct CatalogError {
    std::size_t line_index = 0; // zero-based index of the group's first line
    std::string message;
};

struct Catalog {
    std::vector<TleRecord> records;
    std::vector<CatalogError> errors;
};

/// Reads newline-delimited 2- or 3-line TLE groups. Invalid groups are
/// reported with the index of their first line and skipped; parsing never
/// throws for bad data. Blank lines between groups are ignored.
Catalog load_catalog(std::istream& in);
Catalog load_catalog_string(const std::string& text);
Catalog load_catalog_file(const std::string& path); // throws on I/O failure

/// Writes the records back as 3-line groups, byte-identical to the source
/// lines they were parsed from.
void write_catalog(std::ostream& out, const std::vector<TleRecord>& records);

} // namespace leoplan
