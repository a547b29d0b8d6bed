#include "oracles.hpp"

#include "zfuse/multigrid.hpp"
#include "zfuse/spectral.hpp"

#include <catch_amalgamated.hpp>

#include <limits>
#include <random>

using namespace zfuse;

namespace {

LinearSystem2D system_for(const Grid<double>& low, const Grid<double>& high, double alpha) {
    return std::move(build_system(oracle::as_slice(low), oracle::as_slice(high), alpha).front());
}

}  // namespace

TEST_CASE("fixed point: low == high returns the input") {
    std::mt19937_64 rng(1);
    const Grid<double> s = oracle::random_grid(40, 28, rng);
    const SolveResult r = solve_multigrid(system_for(s, s, 0.001), SolverConfig{}, s);
    REQUIRE(max_abs_diff(r.solution, s) <= 1e-6);
    REQUIRE(r.stats.converged);

    // Starting away from the answer still lands on it.
    const SolveResult r0 = solve_multigrid(system_for(s, s, 0.001), SolverConfig{}, Grid<double>(40, 28));
    REQUIRE(max_abs_diff(r0.solution, s) <= 1e-4);
    REQUIRE(std::abs(mean(r0.solution) - mean(s)) <= 1e-6);
}

TEST_CASE("64x64 random system matches the spectral solution within 8 V-cycles") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 5; ++trial) {
        const Grid<double> low = oracle::random_grid(64, 64, rng);
        const Grid<double> high = oracle::random_grid(64, 64, rng);
        const SolveResult r = solve_multigrid(system_for(low, high, 0.001), SolverConfig{}, low);
        REQUIRE(r.stats.converged);
        REQUIRE(r.stats.cycles <= 8);
        REQUIRE(max_abs_diff(r.solution, spectral_solve(low, high, 0.001)) <= 1e-4);
        REQUIRE(std::abs(mean(r.solution) - mean(low)) <= 1e-6);
    }
}

TEST_CASE("16x16 system matches the dense direct solve") {
    std::mt19937_64 rng(3);
    const Grid<double> low = oracle::random_grid(16, 16, rng);
    const Grid<double> high = oracle::random_grid(16, 16, rng);
    // At the default 1e-6 residual target the error is bounded near 1e-6 (the
    // smallest eigenvalue is alpha), so this comparison runs to 1e-12.
    SolverConfig cfg;
    cfg.tolerance = 1e-12;
    cfg.v_cycles = 32;
    const SolveResult r = solve_multigrid(system_for(low, high, 0.001), cfg, low);
    REQUIRE(r.stats.converged);
    REQUIRE(max_abs_diff(r.solution, oracle::dense_solve(low, high, 0.001)) <= 1e-8);
}

TEST_CASE("odd and degenerate sizes converge to the dense solution") {
    std::mt19937_64 rng(4);
    SolverConfig cfg;
    cfg.tolerance = 1e-10;
    cfg.v_cycles = 40;
    for (auto [w, h] : {std::pair<std::size_t, std::size_t>{37, 23}, {1, 30}, {30, 1}, {1, 1}, {9, 9}, {17, 33}}) {
        const Grid<double> low = oracle::random_grid(w, h, rng);
        const Grid<double> high = oracle::random_grid(w, h, rng);
        const SolveResult r = solve_multigrid(system_for(low, high, 0.01), cfg, low);
        INFO(w << "x" << h);
        REQUIRE(r.stats.converged);
        REQUIRE(max_abs_diff(r.solution, oracle::dense_solve(low, high, 0.01)) <= 1e-7);
    }
}

TEST_CASE("coarsest level can be capped by max_levels") {
    std::mt19937_64 rng(5);
    SolverConfig cfg;
    cfg.max_levels = 2;  // 40x40 -> 20x20, solved directly
    const Grid<double> low = oracle::random_grid(40, 40, rng);
    const Grid<double> high = oracle::random_grid(40, 40, rng);
    MultigridSolver solver(40, 40, 0.001, cfg);
    REQUIRE(solver.level_count() == 2);
    Grid<double> u = low;
    const auto rhs = system_for(low, high, 0.001).rhs;
    REQUIRE(solver.solve(rhs, u).converged);
    REQUIRE(max_abs_diff(u, spectral_solve(low, high, 0.001)) <= 1e-4);
}

TEST_CASE("solutions are linear in the inputs") {
    std::mt19937_64 rng(6);
    const auto l1 = oracle::random_grid(48, 40, rng), h1 = oracle::random_grid(48, 40, rng);
    const auto l2 = oracle::random_grid(48, 40, rng), h2 = oracle::random_grid(48, 40, rng);
    const double a = 0.7, b = -1.3;
    Grid<double> lc(48, 40), hc(48, 40);
    for (std::size_t i = 0; i < lc.size(); ++i) {
        lc.values()[i] = a * l1.values()[i] + b * l2.values()[i];
        hc.values()[i] = a * h1.values()[i] + b * h2.values()[i];
    }
    const SolverConfig cfg;
    const auto u1 = solve_multigrid(system_for(l1, h1, 0.001), cfg, l1).solution;
    const auto u2 = solve_multigrid(system_for(l2, h2, 0.001), cfg, l2).solution;
    const auto uc = solve_multigrid(system_for(lc, hc, 0.001), cfg, lc).solution;
    double worst = 0;
    for (std::size_t i = 0; i < uc.size(); ++i) {
        worst = std::max(worst, std::abs(uc.values()[i] - (a * u1.values()[i] + b * u2.values()[i])));
    }
    REQUIRE(worst <= 1e-4);
}

TEST_CASE("residual falls monotonically and reaches 1e-6 within 12 cycles at 256x256") {
    std::mt19937_64 rng(7);
    const Grid<double> low = oracle::random_grid(256, 256, rng);
    const Grid<double> high = oracle::random_grid(256, 256, rng);
    SolverConfig cfg;
    cfg.tolerance = 1e-12;  // run past the default target to watch the whole history
    cfg.v_cycles = 12;
    const SolveResult r = solve_multigrid(system_for(low, high, 0.001), cfg, Grid<double>(256, 256));
    REQUIRE(r.stats.history.size() == 12);
    double prev = r.stats.initial_residual;
    for (double h : r.stats.history) {
        REQUIRE(h < prev);
        prev = h;
    }
    REQUIRE(r.stats.history.back() <= 1e-6);

    const SolveResult d = solve_multigrid(system_for(low, high, 0.001), SolverConfig{}, low);
    REQUIRE(d.stats.converged);
    REQUIRE(d.stats.cycles <= 12);
    REQUIRE(d.stats.residual <= 1e-6);
}

TEST_CASE("V-cycle work per pixel is constant across sizes") {
    double lo = std::numeric_limits<double>::max(), hi = 0;
    for (std::size_t n : {64u, 128u, 256u, 512u, 1024u}) {
        const MultigridSolver s(n, n, 0.001);
        const double per_pixel = double(s.cycle_work()) / double(n * n);
        lo = std::min(lo, per_pixel);
        hi = std::max(hi, per_pixel);
    }
    REQUIRE(hi / lo <= 1.10);
}

TEST_CASE("multigrid error paths") {
    REQUIRE_THROWS_AS(MultigridSolver(0, 4, 0.1), ArgumentError);
    REQUIRE_THROWS_AS(MultigridSolver(4, 4, 0.0), ArgumentError);
    SolverConfig bad;
    bad.tolerance = 0;
    REQUIRE_THROWS_AS(MultigridSolver(4, 4, 0.1, bad), ArgumentError);

    MultigridSolver s(8, 8, 0.1);
    Grid<double> u(8, 8);
    Grid<double> rhs(8, 8, 1.0);
    rhs(3, 3) = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(s.solve(rhs, u), NumericError);
    Grid<double> wrong(7, 8);
    REQUIRE_THROWS_AS(s.solve(Grid<double>(8, 8), wrong), ArgumentError);
}

TEST_CASE("solver instances are reusable and deterministic") {
    std::mt19937_64 rng(8);
    const Grid<double> low = oracle::random_grid(50, 30, rng), high = oracle::random_grid(50, 30, rng);
    const auto rhs = system_for(low, high, 0.001).rhs;
    MultigridSolver s(50, 30, 0.001);
    Grid<double> a = low;
    s.solve(rhs, a);
    Grid<double> other = oracle::random_grid(50, 30, rng);
    s.solve(rhs, other);
    Grid<double> b = low;
    s.solve(rhs, b);
    REQUIRE(a == b);
}
