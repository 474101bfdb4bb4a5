#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pcir {

// Shortest round-trip decimal representation ("%.17g" is exact for double).
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

// Writes the whole payload to a sibling temp file, then renames it over the
// destination, so readers never observe a partially written file.
inline void write_file_atomic(const std::string& path, const std::string& contents,
                              bool binary = false) {
    namespace fs = std::filesystem;
    fs::path dest(path);
    fs::path tmp = dest;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, binary ? (std::ios::out | std::ios::binary) : std::ios::out);
        if (!out)
            throw std::runtime_error("cannot open for writing: " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out)
            throw std::runtime_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, dest);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::in | std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open: " + path);
    std::string contents((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return contents;
}

// FNV-1a over the bytes of a string; used to derive per-image RNG streams.
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace pcir
