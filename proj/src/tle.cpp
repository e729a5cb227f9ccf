#include "leoplan/tle.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace leoplan {

int checksum(std::string_view line) {
    if (line.size() > 68) line = line.substr(0, 68);
    int sum = 0;
    for (char c : line) {
        if (c >= '0' && c <= '9') sum += c - '0';
        else if (c == '-') sum += 1;
    }
    return sum % 10;
}

namespace {

std::string column_range(int first, int last) {
    return "columns " + std::to_string(first) + "-" + std::to_string(last);
}

// Extracts 1-based inclusive column range [first, last] from a line.
std::string_view field(const std::string& line, int first, int last) {
    return std::string_view(line).substr(static_cast<std::size_t>(first - 1),
                                         static_cast<std::size_t>(last - first + 1));
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

double parse_double(const std::string& line, int line_no, int first, int last,
                    const char* what) {
    const std::string_view raw = trim(field(line, first, last));
    double value = 0.0;
    const auto res = std::from_chars(raw.data(), raw.data() + raw.size(), value);
    if (res.ec != std::errc() || res.ptr != raw.data() + raw.size()) {
        throw TleParseError(TleErrorKind::MalformedField, line_no,
                            std::string("line ") + std::to_string(line_no) + " " +
                                column_range(first, last) + " (" + what + "): bad numeric field '" +
                                std::string(raw) + "'");
    }
    return value;
}

long parse_long(const std::string& line, int line_no, int first, int last, const char* what) {
    const std::string_view raw = trim(field(line, first, last));
    long value = 0;
    const auto res = std::from_chars(raw.data(), raw.data() + raw.size(), value);
    if (res.ec != std::errc() || res.ptr != raw.data() + raw.size()) {
        throw TleParseError(TleErrorKind::MalformedField, line_no,
                            std::string("line ") + std::to_string(line_no) + " " +
                                column_range(first, last) + " (" + what + "): bad integer field '" +
                                std::string(raw) + "'");
    }
    return value;
}

// Fields like "0005197": decimal point assumed before the digits.
double parse_implied_decimal(const std::string& line, int line_no, int first, int last,
                             const char* what) {
    const std::string_view raw = trim(field(line, first, last));
    const long digits = parse_long(line, line_no, first, last, what);
    return static_cast<double>(digits) * std::pow(10.0, -static_cast<double>(raw.size()));
}

// Fields like " 17465-3" or " 00000+0": sign, implied-decimal mantissa,
// signed one-digit exponent. "17465-3" means 0.17465e-3.
double parse_implied_exponent(const std::string& line, int line_no, int first, int last,
                              const char* what) {
    std::string_view raw = trim(field(line, first, last));
    if (raw.empty()) return 0.0;
    double sign = 1.0;
    if (raw.front() == '-') { sign = -1.0; raw.remove_prefix(1); }
    else if (raw.front() == '+') { raw.remove_prefix(1); }
    const std::size_t exp_pos = raw.find_last_of("+-");
    if (exp_pos == std::string_view::npos || exp_pos == 0) {
        throw TleParseError(TleErrorKind::MalformedField, line_no,
                            std::string("line ") + std::to_string(line_no) + " " +
                                column_range(first, last) + " (" + what +
                                "): expected implied-exponent field, got '" + std::string(raw) + "'");
    }
    const std::string_view mantissa = raw.substr(0, exp_pos);
    long digits = 0;
    auto res = std::from_chars(mantissa.data(), mantissa.data() + mantissa.size(), digits);
    int exponent = 0;
    const std::string_view exp_part = raw.substr(exp_pos);
    auto res2 = std::from_chars(exp_part.data() + 1, exp_part.data() + exp_part.size(), exponent);
    if (res.ec != std::errc() || res.ptr != mantissa.data() + mantissa.size() ||
        res2.ec != std::errc() || res2.ptr != exp_part.data() + exp_part.size()) {
        throw TleParseError(TleErrorKind::MalformedField, line_no,
                            std::string("line ") + std::to_string(line_no) + " " +
                                column_range(first, last) + " (" + what +
                                "): bad implied-exponent field '" + std::string(raw) + "'");
    }
    if (exp_part.front() == '-') exponent = -exponent;
    const double mantissa_value =
        static_cast<double>(digits) * std::pow(10.0, -static_cast<double>(mantissa.size()));
    return sign * mantissa_value * std::pow(10.0, exponent);
}

void verify_checksum(const std::string& line, int line_no) {
    const int computed = checksum(line);
    const int stored = line[68] - '0';
    if (stored < 0 || stored > 9) {
        throw TleParseError(TleErrorKind::MalformedField, line_no,
                            std::string("line ") + std::to_string(line_no) +
                                " column 69: checksum digit expected, got '" + line[68] + "'");
    }
    if (computed != stored) {
        throw TleParseError(TleErrorKind::ChecksumMismatch, line_no,
                            std::string("line ") + std::to_string(line_no) +
                                " checksum mismatch: stored " + std::to_string(stored) +
                                ", computed " + std::to_string(computed));
    }
}

} // namespace

TleRecord parse_tle(const std::optional<std::string>& name_line,
                    const std::string& line1, const std::string& line2) {
    if (line1.size() < 69 || line1[0] != '1') {
        throw TleParseError(TleErrorKind::LineIdentifier, 1,
                            "line 1 must be at least 69 columns and start with '1'");
    }
    if (line2.size() < 69 || line2[0] != '2') {
        throw TleParseError(TleErrorKind::LineIdentifier, 2,
                            "line 2 must be at least 69 columns and start with '2'");
    }
    verify_checksum(line1, 1);
    verify_checksum(line2, 2);

    TleRecord rec;
    rec.line1 = line1.substr(0, 69);
    rec.line2 = line2.substr(0, 69);
    rec.catalog_number = static_cast<int>(parse_long(line1, 1, 3, 7, "catalog number"));
    rec.intl_designator = std::string(trim(field(line1, 10, 17)));
    rec.epoch = parse_double(line1, 1, 19, 32, "epoch");
    {
        // Mean-motion rate: optional sign column, then ".nnnnnnnn".
        std::string_view raw = trim(field(line1, 34, 43));
        double sign = 1.0;
        if (!raw.empty() && raw.front() == '-') { sign = -1.0; raw.remove_prefix(1); }
        else if (!raw.empty() && raw.front() == '+') { raw.remove_prefix(1); }
        double value = 0.0;
        const auto res = std::from_chars(raw.data(), raw.data() + raw.size(), value);
        if (res.ec != std::errc() || res.ptr != raw.data() + raw.size()) {
            throw TleParseError(TleErrorKind::MalformedField, 1,
                                "line 1 " + column_range(34, 43) +
                                    " (mean motion dot): bad field '" + std::string(raw) + "'");
        }
        rec.mean_motion_dot = sign * value;
    }
    rec.mean_motion_ddot = parse_implied_exponent(line1, 1, 45, 52, "mean motion ddot");
    rec.bstar = parse_implied_exponent(line1, 1, 54, 61, "bstar");
    rec.checksum1 = line1[68] - '0';

    const long cat2 = parse_long(line2, 2, 3, 7, "catalog number");
    if (cat2 != rec.catalog_number) {
        throw TleParseError(TleErrorKind::MalformedField, 2,
                            "line 2 " + column_range(3, 7) + ": catalog number " +
                                std::to_string(cat2) + " does not match line 1 (" +
                                std::to_string(rec.catalog_number) + ")");
    }
    rec.inclination_deg = parse_double(line2, 2, 9, 16, "inclination");
    rec.raan_deg = parse_double(line2, 2, 18, 25, "raan");
    rec.eccentricity = parse_implied_decimal(line2, 2, 27, 33, "eccentricity");
    rec.arg_perigee_deg = parse_double(line2, 2, 35, 42, "argument of perigee");
    rec.mean_anomaly_deg = parse_double(line2, 2, 44, 51, "mean anomaly");
    rec.mean_motion = parse_double(line2, 2, 53, 63, "mean motion");
    rec.rev_at_epoch = parse_long(line2, 2, 64, 68, "revolution number");
    rec.checksum2 = line2[68] - '0';

    const auto check_range = [](double value, double lo, double hi, bool hi_open,
                                const char* what, int first, int last) {
        const bool ok = value >= lo && (hi_open ? value < hi : value <= hi);
        if (!ok) {
            throw TleParseError(TleErrorKind::MalformedField, 2,
                                "line 2 " + column_range(first, last) + " (" + what + "): value " +
                                    std::to_string(value) + " out of range");
        }
    };
    check_range(rec.inclination_deg, 0.0, 180.0, false, "inclination", 9, 16);
    check_range(rec.raan_deg, 0.0, 360.0, true, "raan", 18, 25);
    check_range(rec.arg_perigee_deg, 0.0, 360.0, true, "argument of perigee", 35, 42);
    check_range(rec.mean_anomaly_deg, 0.0, 360.0, true, "mean anomaly", 44, 51);

    if (rec.mean_motion <= 0.0) {
        throw TleParseError(TleErrorKind::MalformedField, 2,
                            "line 2 " + column_range(53, 63) + ": mean motion must be positive, got " +
                                std::to_string(rec.mean_motion));
    }

    if (name_line && !trim(*name_line).empty()) {
        rec.name = std::string(trim(*name_line));
    } else {
        rec.name = std::to_string(rec.catalog_number);
    }
    return rec;
}

double mean_motion_to_sma(double mean_motion_rev_day, const PhysicalConstants& pc) {
    if (mean_motion_rev_day <= 0.0) {
        throw TleParseError(TleErrorKind::NonPositiveMeanMotion, 0,
                            "mean motion must be positive, got " +
                                std::to_string(mean_motion_rev_day));
    }
    const double n_rad_s = mean_motion_rev_day * kTwoPi / 86400.0;
    return std::cbrt(pc.mu_earth / (n_rad_s * n_rad_s));
}

KeplerianElements tle_to_elements(const TleRecord& record, const PhysicalConstants& pc) {
    KeplerianElements el;
    el.a = mean_motion_to_sma(record.mean_motion, pc);
    el.e = record.eccentricity;
    el.i = deg2rad(record.inclination_deg);
    el.raan = deg2rad(record.raan_deg);
    el.arg_perigee = deg2rad(record.arg_perigee_deg);
    const double mean_anomaly = deg2rad(record.mean_anomaly_deg);
    el.true_anomaly = eccentric_to_true(solve_kepler(mean_anomaly, el.e), el.e);
    return el;
}

namespace {

bool is_tle_line(const std::string& line, char id) {
    return line.size() >= 69 && line[0] == id && line.size() > 1 && line[1] == ' ';
}

std::string rstrip(std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.pop_back();
    return s;
}

} // namespace

Catalog load_catalog(std::istream& in) {
    Catalog catalog;
    std::vector<std::string> lines;
    std::string raw;
    while (std::getline(in, raw)) lines.push_back(rstrip(std::move(raw)));

    std::size_t idx = 0;
    while (idx < lines.size()) {
        if (trim(lines[idx]).empty()) { ++idx; continue; }
        const std::size_t group_start = idx;

        std::optional<std::string> name_line;
        if (!is_tle_line(lines[idx], '1')) {
            name_line = lines[idx];
            ++idx;
        }
        if (idx >= lines.size()) {
            catalog.errors.push_back({group_start, "incomplete group: line 1 missing"});
            break;
        }
        const std::string& l1 = lines[idx];
        if (idx + 1 >= lines.size()) {
            catalog.errors.push_back({group_start, "incomplete group: line 2 missing"});
            break;
        }
        const std::string& l2 = lines[idx + 1];
        idx += 2;

        try {
            catalog.records.push_back(parse_tle(name_line, l1, l2));
        } catch (const TleParseError& err) {
            catalog.errors.push_back({group_start, err.what()});
        }
    }
    return catalog;
}

Catalog load_catalog_string(const std::string& text) {
    std::istringstream in(text);
    return load_catalog(in);
}

Catalog load_catalog_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open catalog file: " + path);
    return load_catalog(in);
}

void write_catalog(std::ostream& out, const std::vector<TleRecord>& records) {
    for (const TleRecord& rec : records) {
        out << rec.name << '\n' << rec.line1 << '\n' << rec.line2 << '\n';
    }
}

} // namespace leoplan
