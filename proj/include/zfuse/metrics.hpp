#pragma once

// Proxy measures for stack quality.
//
// interslice_discontinuity targets content that is smooth in-plane but changes
// between slices: the mean brightness jump between neighbors plus the mean
// absolute difference of neighbors after an in-plane blur (sigma 4).
//
// gradient_preservation is the Pearson correlation between in-plane gradient
// magnitudes of a reference and a result, averaged over slices.

#include "zfuse/error.hpp"
#include "zfuse/image.hpp"
#include "zfuse/smoothing.hpp"
#include "zfuse/volume_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace zfuse {

inline constexpr double discontinuity_blur_sigma = 4.0;

struct Discontinuity {
    double mean_term = 0;     // mean over j of |mean(slice j) - mean(slice j+1)|
    double lowpass_term = 0;  // mean over j of mean |blur(slice j) - blur(slice j+1)|
    [[nodiscard]] double total() const noexcept { return mean_term + lowpass_term; }
};

using SliceSource = std::function<Slice(std::size_t)>;

/// Streams `depth` slices from `source`, holding two at a time.
[[nodiscard]] inline Discontinuity interslice_discontinuity(std::size_t depth, const SliceSource& source) {
    if (depth < 2) throw ArgumentError("interslice_discontinuity needs at least two slices");
    const Kernel1D k = gaussian_kernel(discontinuity_blur_sigma, 3.0);
    Discontinuity d;
    auto channel_means = [](const Slice& s) {
        std::vector<double> m;
        for (std::size_t c = 0; c < s.channels(); ++c) m.push_back(mean(s.channel(c)));
        return m;
    };
    Slice first = source(0);
    std::vector<double> prev_means = channel_means(first);
    Slice prev = smooth_in_plane(first, k);
    for (std::size_t z = 1; z < depth; ++z) {
        const Slice raw = source(z);
        const std::vector<double> means = channel_means(raw);
        Slice cur = smooth_in_plane(raw, k);
        if (!cur.same_shape(prev)) throw ArgumentError("interslice_discontinuity: slices differ in shape");
        double mean_jump = 0;
        double lowpass = 0;
        for (std::size_t c = 0; c < cur.channels(); ++c) {
            const double m = means[c];
            mean_jump += std::abs(m - prev_means[c]);
            prev_means[c] = m;
            auto a = cur.channel(c).values();
            auto b = prev.channel(c).values();
            long double acc = 0;
            for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
            lowpass += static_cast<double>(acc / static_cast<long double>(a.size()));
        }
        const auto channels = static_cast<double>(cur.channels());
        d.mean_term += mean_jump / channels;
        d.lowpass_term += lowpass / channels;
        prev = std::move(cur);
    }
    d.mean_term /= static_cast<double>(depth - 1);
    d.lowpass_term /= static_cast<double>(depth - 1);
    return d;
}

[[nodiscard]] inline Discontinuity interslice_discontinuity(std::span<const Slice> slices) {
    return interslice_discontinuity(slices.size(), [&](std::size_t z) { return slices[z]; });
}

[[nodiscard]] inline Discontinuity interslice_discontinuity(const VolumeMeta& meta) {
    return interslice_discontinuity(meta.depth, [&](std::size_t z) { return read_slice(meta, z); });
}

/// Forward-difference gradient magnitude; the last row/column uses a zero difference.
[[nodiscard]] inline Grid<double> gradient_magnitude(const Grid<double>& g) {
    Grid<double> out(g.width(), g.height());
    for (std::size_t y = 0; y < g.height(); ++y) {
        for (std::size_t x = 0; x < g.width(); ++x) {
            const double gx = x + 1 < g.width() ? g(x + 1, y) - g(x, y) : 0.0;
            const double gy = y + 1 < g.height() ? g(x, y + 1) - g(x, y) : 0.0;
            out(x, y) = std::sqrt(gx * gx + gy * gy);
        }
    }
    return out;
}

/// Pearson correlation of gradient magnitudes over all pixels and channels of one slice.
/// Two gradient-free slices correlate 1; exactly one gradient-free slice correlates 0.
[[nodiscard]] inline double gradient_correlation(const Slice& reference, const Slice& result) {
    if (!reference.same_shape(result)) throw ArgumentError("gradient_preservation: dimension mismatch");
    long double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    std::size_t n = 0;
    for (std::size_t c = 0; c < reference.channels(); ++c) {
        const Grid<double> ga = gradient_magnitude(reference.channel(c));
        const Grid<double> gb = gradient_magnitude(result.channel(c));
        auto a = ga.values();
        auto b = gb.values();
        for (std::size_t i = 0; i < a.size(); ++i) {
            sa += a[i];
            sb += b[i];
            saa += static_cast<long double>(a[i]) * a[i];
            sbb += static_cast<long double>(b[i]) * b[i];
            sab += static_cast<long double>(a[i]) * b[i];
        }
        n += a.size();
    }
    const auto nn = static_cast<long double>(n);
    const long double va = saa - sa * sa / nn;
    const long double vb = sbb - sb * sb / nn;
    const long double cov = sab - sa * sb / nn;
    constexpr long double tiny = 1e-24L;
    const bool flat_a = va <= tiny * nn;
    const bool flat_b = vb <= tiny * nn;
    if (flat_a && flat_b) return 1.0;
    if (flat_a || flat_b) return 0.0;
    return static_cast<double>(std::clamp(cov / std::sqrt(va * vb), -1.0L, 1.0L));
}

[[nodiscard]] inline double gradient_preservation(std::size_t depth, const SliceSource& reference,
                                                  const SliceSource& result) {
    if (depth == 0) throw ArgumentError("gradient_preservation: empty volume");
    double acc = 0;
    for (std::size_t z = 0; z < depth; ++z) acc += gradient_correlation(reference(z), result(z));
    return acc / static_cast<double>(depth);
}

[[nodiscard]] inline double gradient_preservation(std::span<const Slice> reference, std::span<const Slice> result) {
    if (reference.size() != result.size()) throw ArgumentError("gradient_preservation: depth mismatch");
    return gradient_preservation(
        reference.size(), [&](std::size_t z) { return reference[z]; }, [&](std::size_t z) { return result[z]; });
}

[[nodiscard]] inline double gradient_preservation(const VolumeMeta& reference, const VolumeMeta& result) {
    if (reference.width != result.width || reference.height != result.height || reference.depth != result.depth ||
        reference.channels != result.channels) {
        throw ArgumentError("gradient_preservation: dimension mismatch");
    }
    return gradient_preservation(
        reference.depth, [&](std::size_t z) { return read_slice(reference, z); },
        [&](std::size_t z) { return read_slice(result, z); });
}

}  // namespace zfuse
