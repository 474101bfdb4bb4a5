#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pcir/grid.hpp"
#include "pcir/io_util.hpp"

namespace pcir {

// Per-pixel fields travel between CLI stages as headered CSV ("x,y,value",
// row-major, full double precision) since PGM cannot carry reals.

inline std::string field_to_csv(const Grid<double>& f) {
    std::ostringstream out;
    out << "x,y,value\n";
    for (int y = 0; y < f.height(); ++y)
        for (int x = 0; x < f.width(); ++x)
            out << x << "," << y << "," << format_double(f.at(x, y)) << "\n";
    return out.str();
}

inline void write_field_csv(const std::string& path, const Grid<double>& f) {
    write_file_atomic(path, field_to_csv(f));
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            cells.push_back(line.substr(start));
            break;
        }
        cells.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return cells;
}

inline double parse_double(const std::string& s, const std::string& context) {
    double v = 0.0;
    const char* last = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), last, v);
    if (ec != std::errc{} || p != last) {
        if (s == "inf")
            return std::numeric_limits<double>::infinity();
        if (s == "-inf")
            return -std::numeric_limits<double>::infinity();
        throw std::runtime_error(context + ": bad number '" + s + "'");
    }
    return v;
}

inline int parse_int(const std::string& s, const std::string& context) {
    int v = 0;
    const char* last = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), last, v);
    if (ec != std::errc{} || p != last)
        throw std::runtime_error(context + ": bad integer '" + s + "'");
    return v;
}

}  // namespace detail

inline Grid<double> read_field_csv(const std::string& path) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error(path + ": empty file");
    if (line.size() && line.back() == '\r')
        line.pop_back();
    if (line != "x,y,value")
        throw std::runtime_error(path + ": expected header 'x,y,value'");

    struct Cell { int x, y; double v; };
    std::vector<Cell> cells;
    int max_x = -1, max_y = -1;
    while (std::getline(in, line)) {
        if (line.size() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        const auto parts = detail::split_csv_line(line);
        if (parts.size() != 3)
            throw std::runtime_error(path + ": expected 3 columns, got line '" + line + "'");
        Cell c{detail::parse_int(parts[0], path), detail::parse_int(parts[1], path),
               detail::parse_double(parts[2], path)};
        if (c.x < 0 || c.y < 0)
            throw std::runtime_error(path + ": negative coordinates");
        max_x = std::max(max_x, c.x);
        max_y = std::max(max_y, c.y);
        cells.push_back(c);
    }
    if (cells.empty())
        throw std::runtime_error(path + ": no data rows");
    Grid<double> f(max_x + 1, max_y + 1, std::numeric_limits<double>::quiet_NaN());
    for (const auto& c : cells)
        f.at(c.x, c.y) = c.v;
    for (std::size_t i = 0; i < f.size(); ++i)
        if (std::isnan(f[i]))
            throw std::runtime_error(path + ": missing cells (grid not fully covered)");
    return f;
}

// Counts use the same layout with integer values.
inline void write_count_csv(const std::string& path, const CountImage& z) {
    std::ostringstream out;
    out << "x,y,value\n";
    for (int y = 0; y < z.height(); ++y)
        for (int x = 0; x < z.width(); ++x)
            out << x << "," << y << "," << z.at(x, y) << "\n";
    write_file_atomic(path, out.str());
}

inline CountImage read_count_csv(const std::string& path) {
    const Grid<double> f = read_field_csv(path);
    CountImage z(f.width(), f.height());
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double r = std::round(f[i]);
        if (std::fabs(f[i] - r) > 1e-9 || r < 0)
            throw std::runtime_error(path + ": counts must be non-negative integers");
        z[i] = static_cast<int>(r);
    }
    return z;
}

}  // namespace pcir
