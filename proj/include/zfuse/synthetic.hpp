#pragma once

// Synthetic stacks: one fixed in-plane texture repeated on every slice plus a
// random brightness offset per slice, the pattern left by independently imaged
// sections. Optionally one slice has a region zeroed out (missing data).

#include "zfuse/image.hpp"
#include "zfuse/volume_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

namespace zfuse::synthetic {

struct StackSpec {
    std::size_t width = 256;
    std::size_t height = 256;
    std::size_t depth = 64;
    double offset_amplitude = 0.1;  // offsets drawn uniformly from [-a, a]
    std::uint64_t seed = 1;
    std::optional<std::size_t> corrupt_slice;  // zero the lower half of this slice
};

/// Band-limited random texture in roughly [0.2, 0.8]: a sum of random plane
/// waves plus fine per-pixel noise.
[[nodiscard]] inline Grid<double> texture(std::size_t width, std::size_t height, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    constexpr int waves = 24;
    struct Wave {
        double kx, ky, phase, amp;
    };
    std::vector<Wave> ws;
    for (int i = 0; i < waves; ++i) {
        const double period = 4.0 + 60.0 * unit(rng);
        const double angle = 2.0 * std::numbers::pi * unit(rng);
        const double k = 2.0 * std::numbers::pi / period;
        ws.push_back({k * std::cos(angle), k * std::sin(angle), 2.0 * std::numbers::pi * unit(rng), 0.5 + unit(rng)});
    }
    double amp_sum = 0;
    for (const auto& w : ws) amp_sum += w.amp;
    Grid<double> g(width, height);
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            double v = 0;
            for (const auto& w : ws) v += w.amp * std::sin(w.kx * double(x) + w.ky * double(y) + w.phase);
            v = 0.5 + 0.25 * v / std::sqrt(amp_sum * 2.0) + 0.04 * (unit(rng) - 0.5);
            g(x, y) = std::clamp(v, 0.2, 0.8);
        }
    }
    return g;
}

[[nodiscard]] inline std::vector<double> offsets(const StackSpec& spec) {
    std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> dist(-spec.offset_amplitude, spec.offset_amplitude);
    std::vector<double> o(spec.depth);
    for (double& v : o) v = dist(rng);
    return o;
}

/// Slice z of the stack described by `spec`, given its precomputed texture and offsets.
[[nodiscard]] inline Slice make_slice(const StackSpec& spec, const Grid<double>& tex, const std::vector<double>& off,
                                      std::size_t z) {
    Slice s(spec.width, spec.height, 1);
    auto dst = s.channel(0).values();
    auto src = tex.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i] + off[z];
    if (spec.corrupt_slice && *spec.corrupt_slice == z) {
        for (std::size_t y = spec.height / 2; y < spec.height; ++y) {
            for (std::size_t x = 0; x < spec.width; ++x) s.channel(0)(x, y) = 0.0;
        }
    }
    return s;
}

[[nodiscard]] inline std::vector<Slice> make_stack(const StackSpec& spec) {
    const Grid<double> tex = texture(spec.width, spec.height, spec.seed);
    const std::vector<double> off = offsets(spec);
    std::vector<Slice> out;
    out.reserve(spec.depth);
    for (std::size_t z = 0; z < spec.depth; ++z) out.push_back(make_slice(spec, tex, off, z));
    return out;
}

/// Writes the stack to `meta` (dimensions taken from `spec`), one slice at a time.
inline VolumeMeta write_stack(const StackSpec& spec, const fs::path& path, Layout layout, std::size_t bit_depth = 16) {
    VolumeMeta meta;
    meta.width = spec.width;
    meta.height = spec.height;
    meta.depth = spec.depth;
    meta.channels = 1;
    meta.bit_depth = bit_depth;
    meta.layout = layout;
    meta.path = path;
    meta.index_width = default_index_width(spec.depth);
    create_volume(meta);
    const Grid<double> tex = texture(spec.width, spec.height, spec.seed);
    const std::vector<double> off = offsets(spec);
    for (std::size_t z = 0; z < spec.depth; ++z) write_slice(meta, z, make_slice(spec, tex, off, z));
    return meta;
}

}  // namespace zfuse::synthetic
