#pragma once

// Anisotropic, compactly supported Gaussian smoothing of a slice stack.
//
// The kernel is separable: one 1D pass along x, one along y, one along z.
// Near volume faces the taps that fall outside the domain are dropped and the
// remaining ones renormalized, so constants are preserved everywhere.

#include "zfuse/error.hpp"
#include "zfuse/image.hpp"
#include "zfuse/params.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace zfuse {

/// Odd-length symmetric kernel; taps[radius] is the center.
struct Kernel1D {
    std::vector<double> taps{1.0};
    std::size_t radius = 0;
    double sigma = 0.0;

    [[nodiscard]] double tap(std::ptrdiff_t offset) const {
        const auto r = static_cast<std::ptrdiff_t>(radius);
        if (offset < -r || offset > r) return 0.0;
        return taps[static_cast<std::size_t>(offset + r)];
    }
};

/// Half-width of a truncated Gaussian: ceil(truncation * sigma).
[[nodiscard]] inline std::size_t kernel_radius(double sigma, double truncation) {
    if (!(sigma >= 0) || !(truncation > 0)) throw ArgumentError("kernel needs sigma >= 0 and truncation > 0");
    // Guard against 3 * 2.0000000001-style representation noise pushing the radius up by one.
    const double r = truncation * sigma;
    const double nearest = std::round(r);
    return static_cast<std::size_t>(std::abs(r - nearest) < 1e-9 ? nearest : std::ceil(r));
}

[[nodiscard]] inline Kernel1D gaussian_kernel(double sigma, double truncation = 3.0) {
    Kernel1D k;
    k.sigma = sigma;
    k.radius = kernel_radius(sigma, truncation);
    if (k.radius == 0 || sigma == 0) {
        k.radius = 0;
        k.taps = {1.0};
        return k;
    }
    const auto r = static_cast<std::ptrdiff_t>(k.radius);
    k.taps.assign(2 * k.radius + 1, 0.0);
    for (std::ptrdiff_t i = -r; i <= r; ++i) {
        k.taps[static_cast<std::size_t>(i + r)] = std::exp(-double(i * i) / (2.0 * sigma * sigma));
    }
    // Sum from the tails inward so both halves accumulate identically.
    double sum = k.taps[k.radius];
    for (std::size_t i = k.radius; i-- > 0;) sum += 2.0 * k.taps[i];
    for (double& t : k.taps) t /= sum;
    return k;
}

/// Weighted mean of samples[i] with weights[i], normalized by the weight sum.
/// Offsets are accumulated relative to the first sample, so equal samples average
/// to exactly that value.
[[nodiscard]] inline double weighted_mean(std::span<const double> samples, std::span<const double> weights) {
    if (samples.size() != weights.size() || samples.empty()) {
        throw ArgumentError("weighted_mean: samples and weights must have equal nonzero length");
    }
    const double anchor = samples[0];
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        num += weights[i] * (samples[i] - anchor);
        den += weights[i];
    }
    return anchor + num / den;
}

/// Weighted average that ignores samples more than two weighted standard
/// deviations from the weighted mean. The candidate samples themselves take part
/// in the mean and deviation; the deviation is the biased (weights-as-mass) one.
[[nodiscard]] inline double robust_z_average(std::span<const double> samples, std::span<const double> weights) {
    if (samples.size() != weights.size() || samples.empty()) {
        throw ArgumentError("robust_z_average: samples and weights must have equal nonzero length");
    }
    double wsum = 0.0;
    for (double w : weights) wsum += w;
    const double mu = weighted_mean(samples, weights);
    double var = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double d = samples[i] - mu;
        var += weights[i] * d * d;
    }
    const double s = std::sqrt(std::max(0.0, var / wsum));
    if (s == 0.0) return mu;

    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (std::abs(samples[i] - mu) > 2.0 * s) continue;
        num += weights[i] * (samples[i] - mu);
        den += weights[i];
    }
    return den > 0.0 ? mu + num / den : mu;
}

namespace detail {

/// Convolves a strided 1D line with renormalized truncation at both ends.
inline void convolve_line(const double* in, double* out, std::size_t n, std::size_t stride, const Kernel1D& k) {
    const auto r = static_cast<std::ptrdiff_t>(k.radius);
    const auto len = static_cast<std::ptrdiff_t>(n);
    for (std::ptrdiff_t i = 0; i < len; ++i) {
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(-r, -i);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(r, len - 1 - i);
        const double centre = in[static_cast<std::size_t>(i) * stride];
        double num = 0.0;
        double den = 0.0;
        for (std::ptrdiff_t o = lo; o <= hi; ++o) {
            const double w = k.taps[static_cast<std::size_t>(o + r)];
            num += w * (in[static_cast<std::size_t>(i + o) * stride] - centre);
            den += w;
        }
        out[static_cast<std::size_t>(i) * stride] = centre + num / den;
    }
}

}  // namespace detail

enum class Axis { x, y };

/// One in-plane 1D pass over a grid.
[[nodiscard]] inline Grid<double> convolve_axis(const Grid<double>& in, const Kernel1D& k, Axis axis) {
    Grid<double> out(in.width(), in.height());
    if (k.radius == 0) {
        out = in;
        return out;
    }
    const double* src = in.values().data();
    double* dst = out.values().data();
    if (axis == Axis::x) {
        for (std::size_t y = 0; y < in.height(); ++y) {
            detail::convolve_line(src + y * in.width(), dst + y * in.width(), in.width(), 1, k);
        }
    } else {
        for (std::size_t x = 0; x < in.width(); ++x) {
            detail::convolve_line(src + x, dst + x, in.height(), in.width(), k);
        }
    }
    return out;
}

/// In-plane smoothing of every channel: x pass then y pass.
[[nodiscard]] inline Slice smooth_in_plane(const Slice& in, const Kernel1D& k) {
    Slice out(in.width(), in.height(), in.channels());
    for (std::size_t c = 0; c < in.channels(); ++c) {
        out.channel(c) = convolve_axis(convolve_axis(in.channel(c), k, Axis::x), k, Axis::y);
    }
    return out;
}

/// Range of input slices [first, last) that output slice z reads, clipped to the volume.
struct ZSupport {
    std::size_t first = 0;
    std::size_t last = 0;
};

[[nodiscard]] inline ZSupport z_support(std::size_t z, std::size_t depth, std::size_t radius) {
    if (z >= depth) throw ArgumentError("slice index outside volume");
    return {z >= radius ? z - radius : 0, std::min(depth, z + radius + 1)};
}

/// Combines in-plane-smoothed slices along z into output slice z.
///
/// `window(k)` must return the in-plane-smoothed slice k for every k in the
/// z-support of z. With `robust` set the per-pixel average is robust_z_average.
template <class WindowAccess>
[[nodiscard]] Slice combine_z(WindowAccess&& window, std::size_t z, std::size_t depth, const Kernel1D& kz,
                              bool robust) {
    const ZSupport sup = z_support(z, depth, kz.radius);
    const std::size_t n = sup.last - sup.first;
    std::vector<const Slice*> planes(n);
    std::vector<double> weights(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = sup.first + i;
        planes[i] = &window(k);
        weights[i] = kz.tap(static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(z));
    }
    const Slice& ref = *planes[n / 2];
    for (const Slice* p : planes) {
        if (!p->same_shape(ref)) throw ArgumentError("slab slices differ in shape");
    }
    Slice out(ref.width(), ref.height(), ref.channels());
    std::vector<double> samples(n);
    std::vector<const double*> src(n);
    for (std::size_t c = 0; c < ref.channels(); ++c) {
        for (std::size_t i = 0; i < n; ++i) src[i] = planes[i]->channel(c).values().data();
        auto dst = out.channel(c).values();
        for (std::size_t p = 0; p < dst.size(); ++p) {
            for (std::size_t i = 0; i < n; ++i) samples[i] = src[i][p];
            dst[p] = robust ? robust_z_average(samples, weights) : weighted_mean(samples, weights);
        }
    }
    return out;
}

/// Slice z of the smoothed volume, computed from a slab of raw input slices.
///
/// The slab must hold the full z-support of z; it may only be short where the
/// support is clipped by the volume faces (z near 0 or depth-1).
[[nodiscard]] inline Slice smooth_slab(const Slab& slab, std::size_t z, std::size_t depth,
                                       const FusionParams& params) {
    params.validate();
    const Kernel1D kxy = gaussian_kernel(params.sigma_xy, params.truncation);
    const Kernel1D kz = gaussian_kernel(params.sigma_z, params.truncation);
    const ZSupport sup = z_support(z, depth, kz.radius);
    if (slab.z_end > depth || slab.slices.size() != slab.z_end - slab.z_begin) {
        throw ArgumentError("malformed slab");
    }
    if (sup.first < slab.z_begin || sup.last > slab.z_end) {
        throw ArgumentError("slab [" + std::to_string(slab.z_begin) + ", " + std::to_string(slab.z_end) +
                            ") lacks the z-halo [" + std::to_string(sup.first) + ", " + std::to_string(sup.last) +
                            ") needed for slice " + std::to_string(z));
    }
    std::vector<Slice> planar;
    planar.reserve(sup.last - sup.first);
    for (std::size_t k = sup.first; k < sup.last; ++k) planar.push_back(smooth_in_plane(slab.at(k), kxy));
    return combine_z([&](std::size_t k) -> const Slice& { return planar[k - sup.first]; }, z, depth, kz,
                     params.robust);
}

}  // namespace zfuse
