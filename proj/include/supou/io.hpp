#pragma once

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "supou/errors.hpp"

namespace supou {

// ---- delimited tables --------------------------------------------------------

/// Integers print as integers, reals as %.5e, text verbatim.
using Cell = std::variant<long long, double, std::string>;

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add(std::vector<Cell> row) {
        if (row.size() != columns.size()) throw std::invalid_argument("row width differs from the header");
        rows.push_back(std::move(row));
    }
};

[[nodiscard]] inline std::string format_number(double v) {
    if (std::isnan(v)) return "NaN";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.5e", v);
    return buf;
}

[[nodiscard]] inline std::string format_cell(const Cell& c) {
    if (auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
    if (auto* d = std::get_if<double>(&c)) return format_number(*d);
    return std::get<std::string>(c);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) return out;
        start = pos + 1;
    }
}

inline bool parse_double(std::string_view s, double& v) {
    if (s == "NaN" || s == "nan" || s == "NAN") {
        v = std::numeric_limits<double>::quiet_NaN();
        return true;
    }
    if (s == "inf" || s == "-inf") {
        v = s[0] == '-' ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
        return true;
    }
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc() && p == s.data() + s.size() && !s.empty();
}

inline Cell parse_cell(std::string_view s) {
    long long i = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), i);
    if (ec == std::errc() && p == s.data() + s.size() && !s.empty()) return i;
    double d = 0.0;
    if (parse_double(s, d)) return d;
    return std::string(s);
}

}  // namespace detail

inline void write_table(std::ostream& os, const Table& t) {
    for (std::size_t j = 0; j < t.columns.size(); ++j) os << (j ? "," : "") << t.columns[j];
    os << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t j = 0; j < row.size(); ++j) os << (j ? "," : "") << format_cell(row[j]);
        os << '\n';
    }
}

inline void write_table(const std::filesystem::path& path, const Table& t) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    write_table(os, t);
}

/// Inverse of write_table: header, then one row per line.
/// @throws ParseError on ragged rows
[[nodiscard]] inline Table parse_table(std::istream& is) {
    Table t;
    std::string line;
    if (!std::getline(is, line)) throw ParseError("empty table", 1);
    for (auto c : detail::split_commas(line)) t.columns.emplace_back(c);
    std::size_t no = 1;
    while (std::getline(is, line)) {
        ++no;
        if (detail::trim(line).empty()) continue;
        const auto f = detail::split_commas(line);
        if (f.size() != t.columns.size()) throw ParseError("expected " + std::to_string(t.columns.size()) + " fields", no);
        std::vector<Cell> row;
        for (auto s : f) row.push_back(detail::parse_cell(s));
        t.rows.push_back(std::move(row));
    }
    return t;
}

// ---- discharge records -----------------------------------------------------------

struct DischargeSeries {
    std::vector<std::string> timestamps;
    std::vector<double> values;  ///< m3/s, NaN where missing
    std::size_t inserted = 0;    ///< rows added to fill gaps

    [[nodiscard]] std::size_t size() const { return values.size(); }
    [[nodiscard]] std::size_t missing_count() const {
        std::size_t n = 0;
        for (double v : values) n += std::isnan(v) ? 1 : 0;
        return n;
    }
};

namespace detail {

/// "YYYY-MM-DD[T ]HH:MM[:SS][Z]" to seconds since 1970-01-01.
inline bool parse_timestamp(std::string_view s, long long& secs) {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, se = 0;
    char sep = 0;
    const std::string str(s);
    int used = 0;
    if (std::sscanf(str.c_str(), "%4d-%2d-%2d%c%2d:%2d%n", &y, &mo, &d, &sep, &h, &mi, &used) != 6) return false;
    std::string_view rest = s.substr(static_cast<std::size_t>(used));
    if (rest.size() >= 3 && rest[0] == ':') {
        const auto [p, ec] = std::from_chars(rest.data() + 1, rest.data() + 3, se);
        if (ec != std::errc() || p != rest.data() + 3) return false;
        rest.remove_prefix(3);
    }
    if (rest == "Z") rest = {};
    if (!rest.empty() || (sep != 'T' && sep != ' ')) return false;
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{unsigned(mo)},
                                          std::chrono::day{unsigned(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || se > 59) return false;
    const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
    secs = static_cast<long long>(days) * 86400 + h * 3600 + mi * 60 + se;
    return true;
}

inline std::string format_timestamp(long long secs) {
    const std::chrono::sys_days day{std::chrono::days{secs >= 0 ? secs / 86400 : (secs - 86399) / 86400}};
    const std::chrono::year_month_day ymd{day};
    const long long rem = secs - std::chrono::sys_days{ymd}.time_since_epoch().count() * 86400LL;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:%02lld:%02lld", int(ymd.year()), unsigned(ymd.month()),
                  unsigned(ymd.day()), rem / 3600, rem / 60 % 60, rem % 60);
    return buf;
}

}  // namespace detail

inline constexpr std::string_view kDischargeHeader = "timestamp,discharge_m3s";

/// Hourly discharge records. Blank or NaN values are missing. With allow_gaps a jump of
/// several whole hours is filled with missing rows; otherwise it is an error.
/// @throws ParseError naming the offending line
[[nodiscard]] inline DischargeSeries parse_discharge_csv(std::istream& is, bool allow_gaps = false) {
    std::string line;
    if (!std::getline(is, line)) throw ParseError("empty file", 1);
    if (detail::trim(line) != kDischargeHeader)
        throw ParseError("header must be '" + std::string(kDischargeHeader) + "'", 1);
    DischargeSeries s;
    long long prev = 0;
    std::size_t no = 1;
    while (std::getline(is, line)) {
        ++no;
        if (detail::trim(line).empty()) continue;
        const auto f = detail::split_commas(line);
        if (f.size() != 2) throw ParseError("expected 2 fields", no);
        long long t = 0;
        if (!detail::parse_timestamp(f[0], t)) throw ParseError("bad timestamp '" + std::string(f[0]) + "'", no);
        double v = std::numeric_limits<double>::quiet_NaN();
        if (!f[1].empty() && !detail::parse_double(f[1], v))
            throw ParseError("bad discharge value '" + std::string(f[1]) + "'", no);
        if (std::isinf(v) || v < 0.0) throw ParseError("discharge must be finite and nonnegative", no);
        if (!s.values.empty()) {
            const long long dt = t - prev;
            if (dt <= 0) throw ParseError("timestamps not strictly increasing", no);
            if (dt % 3600 != 0) throw ParseError("spacing is not a whole number of hours", no);
            if (dt > 3600) {
                if (!allow_gaps)
                    throw ParseError("gap of " + std::to_string(dt / 3600) + " h (use --allow-gaps)", no);
                for (long long g = prev + 3600; g < t; g += 3600) {
                    s.timestamps.push_back(detail::format_timestamp(g));
                    s.values.push_back(std::numeric_limits<double>::quiet_NaN());
                    ++s.inserted;
                }
            }
        }
        s.timestamps.emplace_back(f[0]);
        s.values.push_back(v);
        prev = t;
    }
    if (s.values.empty()) throw ParseError("no data rows", no);
    return s;
}

[[nodiscard]] inline DischargeSeries read_discharge_csv(const std::filesystem::path& path, bool allow_gaps = false) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    return parse_discharge_csv(is, allow_gaps);
}

}  // namespace supou
