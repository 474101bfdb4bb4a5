#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "pcir/grid.hpp"
#include "pcir/io_util.hpp"

namespace pcir {

namespace detail {

// Next header token, skipping whitespace and '#' comments (which run to EOL).
inline std::string pgm_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
            continue;
        }
        if (std::isspace(c))
            continue;
        tok.push_back(static_cast<char>(c));
        while ((c = in.peek()) != EOF && !std::isspace(c) && c != '#')
            tok.push_back(static_cast<char>(in.get()));
        return tok;
    }
    throw std::runtime_error("PGM: unexpected end of header");
}

inline int pgm_int(std::istream& in) {
    std::string tok = pgm_token(in);
    try {
        std::size_t pos = 0;
        int v = std::stoi(tok, &pos);
        if (pos != tok.size())
            throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("PGM: bad header token '" + tok + "'");
    }
}

}  // namespace detail

// Reads P2 (ASCII) or P5 (binary) portable graymaps with maxval <= 255.
inline IntensityImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::in | std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open: " + path);

    std::string magic = detail::pgm_token(in);
    if (magic != "P2" && magic != "P5")
        throw std::runtime_error("PGM: unsupported magic '" + magic + "' in " + path);

    int width = detail::pgm_int(in);
    int height = detail::pgm_int(in);
    int maxval = detail::pgm_int(in);
    if (width < 1 || height < 1)
        throw std::runtime_error("PGM: bad dimensions in " + path);
    if (maxval < 1 || maxval > 255)
        throw std::runtime_error("PGM: maxval must be in [1,255], got " + std::to_string(maxval));

    IntensityImage img(width, height);
    if (magic == "P2") {
        for (std::size_t i = 0; i < img.size(); ++i) {
            int v = detail::pgm_int(in);
            if (v < 0 || v > maxval)
                throw std::runtime_error("PGM: sample out of range in " + path);
            img[i] = static_cast<double>(v);
        }
    } else {
        // Single whitespace byte separates maxval from raster data.
        int sep = in.get();
        if (sep == EOF || !std::isspace(sep))
            throw std::runtime_error("PGM: missing raster separator in " + path);
        std::string raw(img.size(), '\0');
        in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
        if (static_cast<std::size_t>(in.gcount()) != img.size())
            throw std::runtime_error("PGM: truncated raster in " + path);
        for (std::size_t i = 0; i < img.size(); ++i) {
            int v = static_cast<unsigned char>(raw[i]);
            if (v > maxval)
                throw std::runtime_error("PGM: sample out of range in " + path);
            img[i] = static_cast<double>(v);
        }
    }
    return img;
}

// Writes 8-bit binary (P5) PGM atomically.
inline void write_pgm(const std::string& path, const Grid<std::uint8_t>& img) {
    std::ostringstream out;
    out << "P5\n" << img.width() << " " << img.height() << "\n255\n";
    for (std::size_t i = 0; i < img.size(); ++i)
        out.put(static_cast<char>(img[i]));
    write_file_atomic(path, out.str(), /*binary=*/true);
}

// Affine map of [lo, hi] onto [0, 255] with clamping; lo == hi maps to 0.
inline Grid<std::uint8_t> to_gray8(const Grid<double>& field, double lo, double hi) {
    Grid<std::uint8_t> out(field.width(), field.height());
    const double span = hi - lo;
    for (std::size_t i = 0; i < field.size(); ++i) {
        double t = span > 0 ? (field[i] - lo) / span : 0.0;
        double v = std::lround(std::clamp(t, 0.0, 1.0) * 255.0);
        out[i] = static_cast<std::uint8_t>(v);
    }
    return out;
}

// Counts clipped at 255, no rescaling: a direct preview of the raw data.
inline Grid<std::uint8_t> counts_to_gray8(const CountImage& z) {
    Grid<std::uint8_t> out(z.width(), z.height());
    for (std::size_t i = 0; i < z.size(); ++i)
        out[i] = static_cast<std::uint8_t>(std::clamp(z[i], 0, 255));
    return out;
}

}  // namespace pcir
