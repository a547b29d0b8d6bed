#pragma once

// Geometric multigrid for the screened-Poisson system (alpha - L) u = f on a
// cell-centered grid with Neumann boundaries.
//
// Level l has spacing h = 2^l (in fine pixels) and operator alpha - L/h^2.
// Coarsening takes ceil(n/2) per axis. Prolongation is cell-centered bilinear
// (3/4, 1/4 weights; missing neighbors fold into the nearest coarse cell), and
// restriction is its transpose with rows renormalized to unit sum, which is
// full weighting in the interior. The coarsest level is solved directly with a
// banded Cholesky factorization.

#include "zfuse/error.hpp"
#include "zfuse/image.hpp"
#include "zfuse/params.hpp"
#include "zfuse/poisson.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace zfuse {

struct SolveStats {
    std::size_t cycles = 0;
    double initial_residual = 0.0;
    double residual = 0.0;  // relative residual of the returned solution
    bool converged = false;
    std::vector<double> history;  // relative residual after each V-cycle
    std::uint64_t work = 0;       // point operations spent, see MultigridSolver::cycle_work
};

struct SolveResult {
    Grid<double> solution;
    SolveStats stats;
};

namespace detail {

/// Fine cell f interpolates from at most two coarse cells.
struct Interp {
    std::array<std::size_t, 2> cell{};
    std::array<double, 2> weight{};
};

struct Transfer1D {
    std::vector<Interp> prolong;  // one entry per fine cell
    std::vector<double> colsum;   // per coarse cell, for restriction normalization
};

inline Transfer1D make_transfer(std::size_t fine, std::size_t coarse) {
    Transfer1D t;
    t.prolong.resize(fine);
    t.colsum.assign(coarse, 0.0);
    for (std::size_t f = 0; f < fine; ++f) {
        const std::size_t c = f / 2;
        Interp ip;
        ip.cell = {c, c};
        ip.weight = {1.0, 0.0};
        if (f % 2 == 0 && c > 0) {
            ip.cell = {c - 1, c};
            ip.weight = {0.25, 0.75};
        } else if (f % 2 == 1 && c + 1 < coarse) {
            ip.cell = {c, c + 1};
            ip.weight = {0.75, 0.25};
        }
        for (int k = 0; k < 2; ++k) t.colsum[ip.cell[k]] += ip.weight[k];
        t.prolong[f] = ip;
    }
    return t;
}

/// Banded Cholesky of (alpha - L/h^2) for a w*h grid, bandwidth w.
class BandedCholesky {
public:
    BandedCholesky() = default;
    BandedCholesky(std::size_t w, std::size_t h, double alpha, double inv_h2) : n_(w * h), bw_(w) {
        // band_(i, k) holds A(i, i - k) for k in [0, bw].
        band_.assign(n_ * (bw_ + 1), 0.0);
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                const std::size_t i = y * w + x;
                int nb = (x > 0) + (x + 1 < w) + (y > 0) + (y + 1 < h);
                at(i, 0) = alpha + inv_h2 * nb;
                if (x > 0) at(i, 1) = -inv_h2;
                if (y > 0) at(i, bw_) = -inv_h2;
            }
        }
        for (std::size_t i = 0; i < n_; ++i) {
            const std::size_t kmax = std::min(i, bw_);
            for (std::size_t k = kmax; k >= 1; --k) {
                const std::size_t j = i - k;
                double s = at(i, k);
                const std::size_t lo = (i >= bw_) ? i - bw_ : 0;
                for (std::size_t m = std::max(lo, (j >= bw_) ? j - bw_ : 0); m < j; ++m) s -= at(i, i - m) * at(j, j - m);
                at(i, k) = s / at(j, 0);
            }
            double d = at(i, 0);
            const std::size_t lo = (i >= bw_) ? i - bw_ : 0;
            for (std::size_t m = lo; m < i; ++m) d -= at(i, i - m) * at(i, i - m);
            if (!(d > 0)) throw NumericError("coarse operator is not positive definite");
            at(i, 0) = std::sqrt(d);
        }
    }

    void solve(std::span<double> x) const {
        for (std::size_t i = 0; i < n_; ++i) {
            double s = x[i];
            const std::size_t lo = (i >= bw_) ? i - bw_ : 0;
            for (std::size_t m = lo; m < i; ++m) s -= at(i, i - m) * x[m];
            x[i] = s / at(i, 0);
        }
        for (std::size_t i = n_; i-- > 0;) {
            double s = x[i];
            const std::size_t hi = std::min(n_, i + bw_ + 1);
            for (std::size_t m = i + 1; m < hi; ++m) s -= at(m, m - i) * x[m];
            x[i] = s / at(i, 0);
        }
    }

    [[nodiscard]] std::uint64_t solve_work() const noexcept { return 2 * n_ * (bw_ + 1); }

private:
    double& at(std::size_t i, std::size_t k) { return band_[i * (bw_ + 1) + k]; }
    [[nodiscard]] double at(std::size_t i, std::size_t k) const { return band_[i * (bw_ + 1) + k]; }

    std::size_t n_ = 0;
    std::size_t bw_ = 0;
    std::vector<double> band_;
};

}  // namespace detail

/// Reusable multigrid hierarchy for one grid size and screening weight.
///
/// Not thread-safe; use one solver per worker.
class MultigridSolver {
public:
    MultigridSolver(std::size_t width, std::size_t height, double alpha, SolverConfig config = {})
        : alpha_(alpha), config_(config) {
        config_.validate();
        if (width == 0 || height == 0) throw ArgumentError("multigrid: zero-size grid");
        if (!(alpha > 0) || !std::isfinite(alpha)) throw ArgumentError("multigrid: alpha must be > 0");
        std::size_t w = width;
        std::size_t h = height;
        double inv_h2 = 1.0;
        for (;;) {
            levels_.push_back(Level{w, h, inv_h2, Grid<double>(w, h), Grid<double>(w, h), Grid<double>(w, h), {}, {}});
            if (std::max(w, h) <= config_.coarsest_size || levels_.size() >= config_.max_levels) break;
            const std::size_t cw = (w + 1) / 2;
            const std::size_t ch = (h + 1) / 2;
            levels_.back().tx = detail::make_transfer(w, cw);
            levels_.back().ty = detail::make_transfer(h, ch);
            w = cw;
            h = ch;
            inv_h2 *= 0.25;
        }
        const Level& c = levels_.back();
        coarse_ = detail::BandedCholesky(c.w, c.h, alpha_, c.inv_h2);
    }

    [[nodiscard]] std::size_t width() const noexcept { return levels_.front().w; }
    [[nodiscard]] std::size_t height() const noexcept { return levels_.front().h; }
    [[nodiscard]] double alpha() const noexcept { return alpha_; }
    [[nodiscard]] std::size_t level_count() const noexcept { return levels_.size(); }
    [[nodiscard]] const SolverConfig& config() const noexcept { return config_; }

    /// Point operations in one V-cycle: every relaxation sweep, residual, restriction
    /// and prolongation counts one per grid point; the coarse solve counts its
    /// multiply-adds.
    [[nodiscard]] std::uint64_t cycle_work() const noexcept {
        std::uint64_t work = coarse_.solve_work();
        for (std::size_t l = 0; l + 1 < levels_.size(); ++l) {
            const std::uint64_t n = levels_[l].w * levels_[l].h;
            work += n * (config_.pre_sweeps + config_.post_sweeps + 3);
        }
        return work;
    }

    /// Solves (alpha - L) u = rhs starting from `u`, which receives the result.
    SolveStats solve(const Grid<double>& rhs, Grid<double>& u) {
        Level& top = levels_.front();
        if (rhs.width() != top.w || rhs.height() != top.h || !rhs.same_shape(u)) {
            throw ArgumentError("multigrid: grid dimension mismatch");
        }
        if (!all_finite(rhs.values()) || !all_finite(u.values())) {
            throw NumericError("multigrid: non-finite values in right-hand side or initial guess");
        }
        SolveStats stats;
        const double rhs_norm = std::max(detail::l2_norm(rhs), 1e-300);
        double rhs_sum = 0.0;
        for (double v : rhs.values()) rhs_sum += v;
        const double target_mean = rhs_sum / (alpha_ * static_cast<double>(rhs.size()));

        stats.initial_residual = relative_residual(rhs, u, rhs_norm);
        stats.residual = stats.initial_residual;
        while (stats.residual > config_.tolerance && stats.cycles < config_.v_cycles) {
            top.f = rhs;
            std::swap(top.u, u);
            vcycle(0);
            std::swap(top.u, u);
            correct_mean(u, target_mean);
            stats.work += cycle_work() + 2 * u.size();
            ++stats.cycles;
            stats.residual = relative_residual(rhs, u, rhs_norm);
            stats.history.push_back(stats.residual);
            if (!std::isfinite(stats.residual)) throw NumericError("multigrid: iteration diverged");
        }
        stats.converged = stats.residual <= config_.tolerance;
        return stats;
    }

private:
    struct Level {
        std::size_t w, h;
        double inv_h2;
        Grid<double> u, f, r;
        detail::Transfer1D tx, ty;  // to the next coarser level
    };

    double relative_residual(const Grid<double>& rhs, const Grid<double>& u, double rhs_norm) {
        Level& top = levels_.front();
        detail::residual(u, rhs, alpha_, 1.0, top.r);
        return detail::l2_norm(top.r) / rhs_norm;
    }

    /// Constants are an eigenvector of alpha - L with eigenvalue alpha, and the exact
    /// solution's mean is sum(rhs) / (alpha * n); shifting onto it is the exact
    /// correction in that mode.
    static void correct_mean(Grid<double>& u, double target_mean) {
        const double shift = target_mean - mean(u);
        for (double& v : u.values()) v += shift;
    }

    void vcycle(std::size_t l) {
        Level& lv = levels_[l];
        if (l + 1 == levels_.size()) {
            lv.u = lv.f;
            coarse_.solve(lv.u.values());
            return;
        }
        for (std::size_t i = 0; i < config_.pre_sweeps; ++i) detail::gauss_seidel_sweep(lv.u, lv.f, alpha_, lv.inv_h2);
        detail::residual(lv.u, lv.f, alpha_, lv.inv_h2, lv.r);

        Level& cv = levels_[l + 1];
        restrict_residual(lv, cv.f);
        std::fill(cv.u.values().begin(), cv.u.values().end(), 0.0);
        vcycle(l + 1);
        prolong_add(lv, cv.u);

        for (std::size_t i = 0; i < config_.post_sweeps; ++i) detail::gauss_seidel_sweep(lv.u, lv.f, alpha_, lv.inv_h2);
    }

    static void restrict_residual(const Level& fine, Grid<double>& coarse) {
        std::fill(coarse.values().begin(), coarse.values().end(), 0.0);
        for (std::size_t y = 0; y < fine.h; ++y) {
            const detail::Interp& iy = fine.ty.prolong[y];
            for (std::size_t x = 0; x < fine.w; ++x) {
                const detail::Interp& ix = fine.tx.prolong[x];
                const double r = fine.r(x, y);
                for (int b = 0; b < 2; ++b) {
                    if (iy.weight[b] == 0.0) continue;
                    for (int a = 0; a < 2; ++a) {
                        if (ix.weight[a] == 0.0) continue;
                        coarse(ix.cell[a], iy.cell[b]) += ix.weight[a] * iy.weight[b] * r;
                    }
                }
            }
        }
        for (std::size_t cy = 0; cy < coarse.height(); ++cy) {
            for (std::size_t cx = 0; cx < coarse.width(); ++cx) {
                coarse(cx, cy) /= fine.tx.colsum[cx] * fine.ty.colsum[cy];
            }
        }
    }

    static void prolong_add(Level& fine, const Grid<double>& coarse) {
        for (std::size_t y = 0; y < fine.h; ++y) {
            const detail::Interp& iy = fine.ty.prolong[y];
            for (std::size_t x = 0; x < fine.w; ++x) {
                const detail::Interp& ix = fine.tx.prolong[x];
                double e = 0.0;
                for (int b = 0; b < 2; ++b) {
                    for (int a = 0; a < 2; ++a) e += ix.weight[a] * iy.weight[b] * coarse(ix.cell[a], iy.cell[b]);
                }
                fine.u(x, y) += e;
            }
        }
    }

    double alpha_;
    SolverConfig config_;
    std::vector<Level> levels_;
    detail::BandedCholesky coarse_;
};

/// One-shot solve of a single-channel system from `initial_guess`.
[[nodiscard]] inline SolveResult solve_multigrid(const LinearSystem2D& system, const SolverConfig& config,
                                                 const Grid<double>& initial_guess) {
    if (system.rhs.empty()) throw ArgumentError("multigrid: zero-size grid");
    MultigridSolver solver(system.rhs.width(), system.rhs.height(), system.alpha, config);
    SolveResult result{initial_guess, {}};
    result.stats = solver.solve(system.rhs, result.solution);
    return result;
}

}  // namespace zfuse
