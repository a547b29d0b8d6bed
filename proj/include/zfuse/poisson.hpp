#pragma once

// Discrete screened-Poisson system on one slice:
//
//     (alpha - L) u = alpha * low - L high
//
// where L is the 5-point Laplacian with unit spacing and Neumann boundaries
// (out-of-domain neighbors are omitted from the stencil).

#include "zfuse/error.hpp"
#include "zfuse/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace zfuse {

/// 5-point Laplacian; returns sum over existing 4-neighbors of (I_nbr - I_xy).
[[nodiscard]] inline Grid<double> laplacian_apply(const Grid<double>& g) {
    const std::size_t w = g.width();
    const std::size_t h = g.height();
    Grid<double> out(w, h);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const double c = g(x, y);
            double acc = 0.0;
            if (x > 0) acc += g(x - 1, y) - c;
            if (x + 1 < w) acc += g(x + 1, y) - c;
            if (y > 0) acc += g(x, y - 1) - c;
            if (y + 1 < h) acc += g(x, y + 1) - c;
            out(x, y) = acc;
        }
    }
    return out;
}

/// Right-hand side and screening weight of one single-channel system.
struct LinearSystem2D {
    Grid<double> rhs;
    double alpha = 0.0;
};

/// Builds one system per channel: rhs_c = alpha * low_c - laplacian(high_c).
[[nodiscard]] inline std::vector<LinearSystem2D> build_system(const Slice& low, const Slice& high, double alpha) {
    if (!low.same_shape(high)) throw ArgumentError("build_system: low and high differ in shape");
    if (!(alpha > 0) || !std::isfinite(alpha)) throw ArgumentError("build_system: alpha must be > 0");
    std::vector<LinearSystem2D> systems;
    systems.reserve(low.channels());
    for (std::size_t c = 0; c < low.channels(); ++c) {
        Grid<double> rhs = laplacian_apply(high.channel(c));
        auto r = rhs.values();
        auto l = low.channel(c).values();
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = alpha * l[i] - r[i];
        systems.push_back({std::move(rhs), alpha});
    }
    return systems;
}

namespace detail {

/// (alpha - L/h^2) u at one pixel, with Neumann boundaries.
inline double apply_at(const Grid<double>& u, std::size_t x, std::size_t y, double alpha, double inv_h2) {
    const std::size_t w = u.width();
    const std::size_t h = u.height();
    const double c = u(x, y);
    double lap = 0.0;
    if (x > 0) lap += u(x - 1, y) - c;
    if (x + 1 < w) lap += u(x + 1, y) - c;
    if (y > 0) lap += u(x, y - 1) - c;
    if (y + 1 < h) lap += u(x, y + 1) - c;
    return alpha * c - inv_h2 * lap;
}

/// r = f - (alpha - L/h^2) u
inline void residual(const Grid<double>& u, const Grid<double>& f, double alpha, double inv_h2, Grid<double>& r) {
    for (std::size_t y = 0; y < u.height(); ++y) {
        for (std::size_t x = 0; x < u.width(); ++x) r(x, y) = f(x, y) - apply_at(u, x, y, alpha, inv_h2);
    }
}

/// One lexicographic Gauss-Seidel sweep on (alpha - L/h^2) u = f.
inline void gauss_seidel_sweep(Grid<double>& u, const Grid<double>& f, double alpha, double inv_h2) {
    const std::size_t w = u.width();
    const std::size_t h = u.height();
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            double sum = 0.0;
            int n = 0;
            if (x > 0) { sum += u(x - 1, y); ++n; }
            if (x + 1 < w) { sum += u(x + 1, y); ++n; }
            if (y > 0) { sum += u(x, y - 1); ++n; }
            if (y + 1 < h) { sum += u(x, y + 1); ++n; }
            u(x, y) = (f(x, y) + inv_h2 * sum) / (alpha + inv_h2 * n);
        }
    }
}

inline double l2_norm(const Grid<double>& g) {
    long double acc = 0;
    for (double v : g.values()) acc += static_cast<long double>(v) * v;
    return static_cast<double>(std::sqrt(acc));
}

}  // namespace detail

/// In-place Gauss-Seidel sweeps on the unit-spacing system.
inline void relax(const LinearSystem2D& system, Grid<double>& u, std::size_t sweeps = 1) {
    if (!system.rhs.same_shape(u)) throw ArgumentError("relax: dimension mismatch");
    for (std::size_t i = 0; i < sweeps; ++i) detail::gauss_seidel_sweep(u, system.rhs, system.alpha, 1.0);
}

/// (alpha - L) applied to a grid.
[[nodiscard]] inline Grid<double> screened_apply(const Grid<double>& u, double alpha) {
    Grid<double> out(u.width(), u.height());
    for (std::size_t y = 0; y < u.height(); ++y) {
        for (std::size_t x = 0; x < u.width(); ++x) out(x, y) = detail::apply_at(u, x, y, alpha, 1.0);
    }
    return out;
}

/// Relative residual ||rhs - (alpha - L) u|| / max(||rhs||, eps).
[[nodiscard]] inline double residual_norm(const LinearSystem2D& system, const Grid<double>& solution) {
    if (!system.rhs.same_shape(solution)) throw ArgumentError("residual_norm: dimension mismatch");
    constexpr double eps = 1e-300;
    Grid<double> r(solution.width(), solution.height());
    detail::residual(solution, system.rhs, system.alpha, 1.0, r);
    return detail::l2_norm(r) / std::max(detail::l2_norm(system.rhs), eps);
}

}  // namespace zfuse
