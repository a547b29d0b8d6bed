#pragma once

// Closed-form solve of the screened-Poisson fusion in the cosine basis.
//
// The DCT-II vectors cos(pi k (x + 1/2) / n) diagonalize the Neumann 5-point
// Laplacian with eigenvalues -4 sin^2(pi k / 2n), so per mode
//
//     u_hat = (alpha * low_hat + lambda * high_hat) / (alpha + lambda)
//
// solves the discrete system exactly. Cost is O(n^3) via dense transforms;
// this is a reference path for small slices, not the production solver.

#include "zfuse/error.hpp"
#include "zfuse/image.hpp"

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

namespace zfuse {

/// Orthonormal DCT-II matrix, row k holds basis vector k.
class CosineBasis {
public:
    explicit CosineBasis(std::size_t n) : n_(n), m_(n * n) {
        for (std::size_t k = 0; k < n; ++k) {
            const double s = std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n));
            for (std::size_t x = 0; x < n; ++x) {
                m_[k * n + x] = s * std::cos(std::numbers::pi * static_cast<double>(k) * (static_cast<double>(x) + 0.5) /
                                             static_cast<double>(n));
            }
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return n_; }
    [[nodiscard]] double operator()(std::size_t k, std::size_t x) const noexcept { return m_[k * n_ + x]; }

    /// Eigenvalue of -L (1D, Neumann) for mode k.
    [[nodiscard]] double eigenvalue(std::size_t k) const noexcept {
        const double s = std::sin(std::numbers::pi * static_cast<double>(k) / (2.0 * static_cast<double>(n_)));
        return 4.0 * s * s;
    }

private:
    std::size_t n_;
    std::vector<double> m_;
};

namespace detail {

/// out = B_y * g * B_x^T (forward) or B_y^T * g * B_x (inverse).
inline Grid<double> cosine_transform(const Grid<double>& g, const CosineBasis& bx, const CosineBasis& by,
                                     bool inverse) {
    const std::size_t w = g.width();
    const std::size_t h = g.height();
    Grid<double> tmp(w, h);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t k = 0; k < w; ++k) {
            double acc = 0.0;
            for (std::size_t x = 0; x < w; ++x) acc += (inverse ? bx(x, k) : bx(k, x)) * g(x, y);
            tmp(k, y) = acc;
        }
    }
    Grid<double> out(w, h);
    for (std::size_t k = 0; k < w; ++k) {
        for (std::size_t l = 0; l < h; ++l) {
            double acc = 0.0;
            for (std::size_t y = 0; y < h; ++y) acc += (inverse ? by(y, l) : by(l, y)) * tmp(k, y);
            out(k, l) = acc;
        }
    }
    return out;
}

}  // namespace detail

[[nodiscard]] inline Grid<double> dct2(const Grid<double>& g) {
    return detail::cosine_transform(g, CosineBasis(g.width()), CosineBasis(g.height()), false);
}

[[nodiscard]] inline Grid<double> idct2(const Grid<double>& g) {
    return detail::cosine_transform(g, CosineBasis(g.width()), CosineBasis(g.height()), true);
}

/// Blend weights for one mode with Laplacian eigenvalue lambda >= 0.
struct ModeWeights {
    double low;
    double high;
};

[[nodiscard]] inline ModeWeights mode_weights(double lambda, double alpha) noexcept {
    return {alpha / (alpha + lambda), lambda / (alpha + lambda)};
}

/// Exact solution of the single-channel system for `low` and `high`.
[[nodiscard]] inline Grid<double> spectral_solve(const Grid<double>& low, const Grid<double>& high, double alpha) {
    if (!low.same_shape(high)) throw ArgumentError("spectral_solve: dimension mismatch");
    if (!(alpha > 0)) throw ArgumentError("spectral_solve: alpha must be > 0");
    const CosineBasis bx(low.width());
    const CosineBasis by(low.height());
    const Grid<double> lo = detail::cosine_transform(low, bx, by, false);
    const Grid<double> hi = detail::cosine_transform(high, bx, by, false);
    Grid<double> mixed(low.width(), low.height());
    for (std::size_t l = 0; l < low.height(); ++l) {
        for (std::size_t k = 0; k < low.width(); ++k) {
            const ModeWeights wts = mode_weights(bx.eigenvalue(k) + by.eigenvalue(l), alpha);
            mixed(k, l) = wts.low * lo(k, l) + wts.high * hi(k, l);
        }
    }
    return detail::cosine_transform(mixed, bx, by, true);
}

/// Per-channel spectral solve.
[[nodiscard]] inline Slice spectral_solve(const Slice& low, const Slice& high, double alpha) {
    if (!low.same_shape(high)) throw ArgumentError("spectral_solve: dimension mismatch");
    std::vector<Grid<double>> planes;
    for (std::size_t c = 0; c < low.channels(); ++c) planes.push_back(spectral_solve(low.channel(c), high.channel(c), alpha));
    return Slice(std::move(planes));
}

}  // namespace zfuse
