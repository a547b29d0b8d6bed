#pragma once

// Two-phase fusion of a slice stack.
//
//   phase 1: low  = input smoothed with the anisotropic Gaussian (x, y, then z)
//   phase 2: out  = solution of (alpha - L) out = alpha * low - L input, per slice
//
// The volume is streamed through a window of 2 * halo + batch slices, where the
// batch is one slice per worker, so memory does not grow with depth.

#include "zfuse/error.hpp"
#include "zfuse/image.hpp"
#include "zfuse/memory.hpp"
#include "zfuse/multigrid.hpp"
#include "zfuse/parallel.hpp"
#include "zfuse/params.hpp"
#include "zfuse/poisson.hpp"
#include "zfuse/smoothing.hpp"
#include "zfuse/volume_io.hpp"

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <deque>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace zfuse {

struct RunOptions {
    std::size_t workers = 1;
    bool resume = false;                      // skip output slices that already exist
    std::optional<VolumeMeta> smoothed_output;  // also persist the smoothed volume
};

struct RunReport {
    std::size_t slices = 0;
    std::size_t solved = 0;
    std::size_t skipped = 0;
    std::size_t workers = 1;
    std::size_t halo = 0;
    std::size_t window_slices = 0;  // largest number of slices held in the window

    // Per-phase times are summed over workers; wall is elapsed time.
    double read_seconds = 0;
    double smooth_seconds = 0;
    double solve_seconds = 0;
    double write_seconds = 0;
    double wall_seconds = 0;

    std::size_t peak_bytes = 0;  // peak tracked sample memory during the run

    double residual_max = 0;
    double residual_mean = 0;
    std::size_t cycles_max = 0;
    double cycles_mean = 0;
    std::size_t nonconverged = 0;
    double tolerance = 0;

    std::vector<std::pair<std::string, std::string>> extra;  // appended key/value lines

    void add(const std::string& key, double value) {
        std::ostringstream os;
        os << std::setprecision(10) << value;
        extra.emplace_back(key, os.str());
    }
    void add(const std::string& key, const std::string& value) { extra.emplace_back(key, value); }

    /// Key/value lines, one `key=value` per line.
    [[nodiscard]] std::string key_values() const {
        std::ostringstream os;
        os << std::setprecision(10);
        os << "slices=" << slices << '\n'
           << "solved=" << solved << '\n'
           << "skipped=" << skipped << '\n'
           << "workers=" << workers << '\n'
           << "halo=" << halo << '\n'
           << "window_slices=" << window_slices << '\n'
           << "read_seconds=" << read_seconds << '\n'
           << "smooth_seconds=" << smooth_seconds << '\n'
           << "solve_seconds=" << solve_seconds << '\n'
           << "write_seconds=" << write_seconds << '\n'
           << "wall_seconds=" << wall_seconds << '\n'
           << "peak_bytes=" << peak_bytes << '\n'
           << "residual_max=" << residual_max << '\n'
           << "residual_mean=" << residual_mean << '\n'
           << "cycles_max=" << cycles_max << '\n'
           << "cycles_mean=" << cycles_mean << '\n'
           << "nonconverged=" << nonconverged << '\n';
        for (const auto& [k, v] : extra) os << k << '=' << v << '\n';
        return os.str();
    }

    [[nodiscard]] std::string summary() const {
        std::ostringstream os;
        os << std::fixed << std::setprecision(3);
        os << "fused " << solved << " of " << slices << " slices (" << skipped << " skipped) with " << workers
           << " worker(s), halo " << halo << '\n';
        os << "  time: read " << read_seconds << "s, smooth " << smooth_seconds << "s, solve " << solve_seconds
           << "s, write " << write_seconds << "s, wall " << wall_seconds << "s\n";
        os << "  peak sample memory: " << peak_bytes << " bytes (" << window_slices << " slices in window)\n";
        os << std::scientific << std::setprecision(2);
        os << "  residual: max " << residual_max << ", mean " << residual_mean << " (tolerance " << tolerance
           << "), " << nonconverged << " non-converged\n";
        return os.str();
    }

    [[nodiscard]] std::string to_text() const { return summary() + "[report]\n" + key_values(); }
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct WindowEntry {
    std::size_t z;
    Slice raw;     // input slice (high-frequency source)
    Slice planar;  // in-plane smoothed slice
};

struct WorkerState {
    std::optional<MultigridSolver> solver;
    double smooth = 0;
    double solve = 0;
    double write = 0;
    std::vector<SolveStats> stats;
};

}  // namespace detail

/// Solves the fusion system for every channel of one slice, starting from `low`.
[[nodiscard]] inline Slice solve_slice(const Slice& low, const Slice& high, double alpha, MultigridSolver& solver,
                                       std::vector<SolveStats>* stats = nullptr) {
    const auto systems = build_system(low, high, alpha);
    Slice out = low;
    for (std::size_t c = 0; c < systems.size(); ++c) {
        SolveStats s = solver.solve(systems[c].rhs, out.channel(c));
        if (stats) stats->push_back(std::move(s));
    }
    return out;
}

/// Fuses `input` into `output` (which must have the same dimensions).
[[nodiscard]] inline RunReport fuse_stack(const VolumeMeta& input, const VolumeMeta& output, const FusionParams& params,
                                          const SolverConfig& solver, const RunOptions& options = {}) {
    params.validate();
    solver.validate();
    input.validate();
    output.validate();
    if (input.width != output.width || input.height != output.height || input.depth != output.depth ||
        input.channels != output.channels) {
        throw ArgumentError("fuse_stack: input and output dimensions differ");
    }
    if (options.smoothed_output) {
        const VolumeMeta& s = *options.smoothed_output;
        if (s.width != input.width || s.height != input.height || s.depth != input.depth || s.channels != input.channels) {
            throw ArgumentError("fuse_stack: smoothed output dimensions differ");
        }
        create_volume(s);
    }
    create_volume(output);

    const auto t_start = detail::Clock::now();
    auto& tracker = MemoryTracker::instance();
    const std::size_t baseline = tracker.current_bytes();
    tracker.reset_peak();

    const Kernel1D kxy = gaussian_kernel(params.sigma_xy, params.truncation);
    const Kernel1D kz = gaussian_kernel(params.sigma_z, params.truncation);
    const std::size_t halo = kz.radius;
    const std::size_t depth = input.depth;
    const std::size_t workers = std::max<std::size_t>(1, options.workers);

    RunReport report;
    report.slices = depth;
    report.workers = workers;
    report.halo = halo;
    report.tolerance = solver.tolerance;

    std::vector<detail::WorkerState> state(workers);
    std::deque<detail::WindowEntry> window;
    auto entry = [&](std::size_t z) -> detail::WindowEntry& { return window[z - window.front().z]; };

    for (std::size_t j0 = 0; j0 < depth; j0 += workers) {
        const std::size_t j1 = std::min(depth, j0 + workers);

        std::vector<std::size_t> todo;
        for (std::size_t j = j0; j < j1; ++j) {
            if (!(options.resume && slice_exists(output, j) &&
                  (!options.smoothed_output || slice_exists(*options.smoothed_output, j)))) {
                todo.push_back(j);
            }
        }
        report.skipped += (j1 - j0) - todo.size();
        if (todo.empty()) continue;

        const std::size_t need_first = j0 >= halo ? j0 - halo : 0;
        const std::size_t need_last = std::min(depth, j1 + halo);
        while (!window.empty() && window.front().z < need_first) window.pop_front();
        if (!window.empty() && window.back().z + 1 < need_first) window.clear();

        std::size_t load_from = window.empty() ? need_first : window.back().z + 1;
        const std::size_t first_new = window.size();
        if (load_from < need_last) {
            const auto t0 = detail::Clock::now();
            for (std::size_t z = load_from; z < need_last; ++z) {
                window.push_back({z, read_slice(input, z), Slice{}});
            }
            report.read_seconds += detail::seconds_since(t0);
        }
        report.window_slices = std::max(report.window_slices, window.size());

        const std::size_t n_new = window.size() - first_new;
        parallel_blocks(n_new, workers, [&](std::size_t w, std::size_t b, std::size_t e) {
            const auto t0 = detail::Clock::now();
            for (std::size_t i = b; i < e; ++i) {
                auto& we = window[first_new + i];
                we.planar = smooth_in_plane(we.raw, kxy);
            }
            state[w].smooth += detail::seconds_since(t0);
        });

        parallel_blocks(todo.size(), workers, [&](std::size_t w, std::size_t b, std::size_t e) {
            detail::WorkerState& ws = state[w];
            for (std::size_t i = b; i < e; ++i) {
                const std::size_t j = todo[i];
                auto t0 = detail::Clock::now();
                Slice low = combine_z([&](std::size_t k) -> const Slice& { return entry(k).planar; }, j, depth, kz,
                                      params.robust);
                ws.smooth += detail::seconds_since(t0);

                t0 = detail::Clock::now();
                if (!ws.solver) ws.solver.emplace(input.width, input.height, params.alpha, solver);
                Slice fused;
                try {
                    fused = solve_slice(low, entry(j).raw, params.alpha, *ws.solver, &ws.stats);
                } catch (const NumericError& err) {
                    throw SliceError(j, err.what());
                }
                ws.solve += detail::seconds_since(t0);

                t0 = detail::Clock::now();
                if (options.smoothed_output) write_slice(*options.smoothed_output, j, low);
                write_slice(output, j, fused);
                ws.write += detail::seconds_since(t0);
            }
        });
        report.solved += todo.size();
    }

    double residual_sum = 0;
    double cycle_sum = 0;
    std::size_t solves = 0;
    for (const auto& ws : state) {
        report.smooth_seconds += ws.smooth;
        report.solve_seconds += ws.solve;
        report.write_seconds += ws.write;
        for (const SolveStats& s : ws.stats) {
            report.residual_max = std::max(report.residual_max, s.residual);
            report.cycles_max = std::max(report.cycles_max, s.cycles);
            residual_sum += s.residual;
            cycle_sum += static_cast<double>(s.cycles);
            if (!s.converged) ++report.nonconverged;
            ++solves;
        }
    }
    if (solves > 0) {
        report.residual_mean = residual_sum / static_cast<double>(solves);
        report.cycles_mean = cycle_sum / static_cast<double>(solves);
    }
    report.wall_seconds = detail::seconds_since(t_start);
    window.clear();
    state.clear();
    report.peak_bytes = tracker.peak_bytes() - std::min(baseline, tracker.peak_bytes());
    return report;
}

/// Expands a single-channel slice to `channels` by copying the plane.
[[nodiscard]] inline Slice replicate_channels(const Slice& s, std::size_t channels) {
    if (s.channels() == channels) return s;
    if (s.channels() != 1) throw ArgumentError("can only replicate single-channel slices");
    return Slice(std::vector<Grid<double>>(channels, s.channel(0)));
}

/// Merges the low frequencies of `low` with the high frequencies of `high`.
/// A monochrome input paired with an RGB one is replicated into three channels.
[[nodiscard]] inline Slice fuse_pair(const Slice& low, const Slice& high, double alpha, const SolverConfig& config = {},
                                     std::vector<SolveStats>* stats = nullptr) {
    if (!low.same_pixels(high)) throw ArgumentError("fuse_pair: images differ in size");
    const std::size_t channels = std::max(low.channels(), high.channels());
    const Slice lo = replicate_channels(low, channels);
    const Slice hi = replicate_channels(high, channels);
    MultigridSolver solver(low.width(), low.height(), alpha, config);
    return solve_slice(lo, hi, alpha, solver, stats);
}

}  // namespace zfuse
