#pragma once

// Deterministic text output: fixed double formatting, atomic file writes, and
// the config hash. Identical configs must produce byte-identical CSVs.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

namespace sheetsew {

inline std::string fmt17(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::uint64_t fnv1a64(const std::string& s)
{
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

inline void write_file_atomic(const std::filesystem::path& path, const std::string& content)
{
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write " + tmp);
        os << content;
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace sheetsew
