#ifndef GBMPO_IO_HPP
#define GBMPO_IO_HPP

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gbmpo/divergence.hpp"

namespace gbmpo {

/// Shortest-safe round-trip decimal form of a double ("nan"/"inf" spelled out).
inline std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// Fixed-precision form for human-facing tables.
inline std::string format_fixed(double x, int digits) {
    if (!std::isfinite(x)) return format_double(x);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << contents;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Mirror-map checkpoint: the 380 flattened parameters, one per line.
inline void save_checkpoint(const std::filesystem::path& path, const NeuralMirrorParams& params) {
    std::string text;
    for (double x : params.flatten()) text += format_double(x) + "\n";
    write_text_file(path, text);
}

inline NeuralMirrorParams load_checkpoint(const std::filesystem::path& path) {
    std::istringstream in(read_text_file(path));
    std::vector<double> flat;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::size_t used = 0;
        double x = 0.0;
        try {
            x = std::stod(line, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != line.size())
            throw std::runtime_error(path.string() + ":" + std::to_string(flat.size() + 1) + ": not a number");
        flat.push_back(x);
    }
    return NeuralMirrorParams::unflatten(flat);
}

}  // namespace gbmpo

#endif  // GBMPO_IO_HPP
