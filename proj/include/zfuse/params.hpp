#pragma once

#include "zfuse/error.hpp"

#include <cmath>
#include <cstddef>

namespace zfuse {

/// Parameters of the two-phase fusion. Defaults are the values used for EM stacks.
struct FusionParams {
    double sigma_xy = 1.0;    // in-slice Gaussian sigma, pixels
    double sigma_z = 3.0;     // cross-slice Gaussian sigma, slices
    double alpha = 0.001;     // screening weight, 1/pixel^2
    double truncation = 3.0;  // kernel support in multiples of sigma
    bool robust = false;      // outlier-rejecting average along z

    void validate() const {
        if (!(std::isfinite(sigma_xy) && sigma_xy >= 0)) throw ArgumentError("sigma_xy must be >= 0");
        if (!(std::isfinite(sigma_z) && sigma_z >= 0)) throw ArgumentError("sigma_z must be >= 0");
        if (!(std::isfinite(alpha) && alpha > 0)) throw ArgumentError("alpha must be > 0");
        if (!(std::isfinite(truncation) && truncation > 0)) throw ArgumentError("truncation must be > 0");
    }
};

/// Multigrid schedule.
struct SolverConfig {
    std::size_t v_cycles = 16;
    std::size_t pre_sweeps = 2;
    std::size_t post_sweeps = 2;
    std::size_t coarsest_size = 8;  // stop coarsening once both sides are <= this
    double tolerance = 1e-6;        // relative residual target
    std::size_t max_levels = 32;

    void validate() const {
        if (v_cycles < 1 || pre_sweeps < 1 || post_sweeps < 1 || coarsest_size < 1 || max_levels < 1) {
            throw ArgumentError("solver counts must be >= 1");
        }
        if (!(std::isfinite(tolerance) && tolerance > 0)) throw ArgumentError("tolerance must be > 0");
    }
};

}  // namespace zfuse
