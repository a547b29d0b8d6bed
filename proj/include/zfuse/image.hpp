#pragma once

#include "zfuse/error.hpp"
#include "zfuse/memory.hpp"

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace zfuse {

template <std::floating_point Real>
using SampleBuffer = std::vector<Real, TrackingAllocator<Real>>;

/// Single-channel 2D scalar grid, row-major, x fastest.
template <std::floating_point Real>
class Grid {
public:
    Grid() = default;
    Grid(std::size_t width, std::size_t height, Real fill = Real(0))
        : width_(width), height_(height), data_(width * height, fill) {}

    [[nodiscard]] std::size_t width() const noexcept { return width_; }
    [[nodiscard]] std::size_t height() const noexcept { return height_; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    Real& operator()(std::size_t x, std::size_t y) noexcept { return data_[y * width_ + x]; }
    const Real& operator()(std::size_t x, std::size_t y) const noexcept { return data_[y * width_ + x]; }

    [[nodiscard]] std::span<Real> values() noexcept { return data_; }
    [[nodiscard]] std::span<const Real> values() const noexcept { return data_; }
    [[nodiscard]] std::span<Real> row(std::size_t y) noexcept { return {data_.data() + y * width_, width_}; }
    [[nodiscard]] std::span<const Real> row(std::size_t y) const noexcept {
        return {data_.data() + y * width_, width_};
    }

    [[nodiscard]] bool same_shape(const Grid& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_;
    }

    bool operator==(const Grid& other) const = default;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    SampleBuffer<Real> data_;
};

/// Multi-channel image stored as one Grid per channel (planar).
template <std::floating_point Real>
class Image {
public:
    Image() = default;
    Image(std::size_t width, std::size_t height, std::size_t channels, Real fill = Real(0))
        : planes_(channels, Grid<Real>(width, height, fill)) {}
    explicit Image(std::vector<Grid<Real>> planes) : planes_(std::move(planes)) {
        for (const auto& p : planes_) {
            if (!p.same_shape(planes_.front())) throw ArgumentError("image planes differ in size");
        }
    }

    [[nodiscard]] std::size_t width() const noexcept { return planes_.empty() ? 0 : planes_[0].width(); }
    [[nodiscard]] std::size_t height() const noexcept { return planes_.empty() ? 0 : planes_[0].height(); }
    [[nodiscard]] std::size_t channels() const noexcept { return planes_.size(); }

    Grid<Real>& channel(std::size_t c) { return planes_.at(c); }
    const Grid<Real>& channel(std::size_t c) const { return planes_.at(c); }

    [[nodiscard]] bool same_pixels(const Image& other) const noexcept {
        return width() == other.width() && height() == other.height();
    }
    [[nodiscard]] bool same_shape(const Image& other) const noexcept {
        return same_pixels(other) && channels() == other.channels();
    }

    bool operator==(const Image& other) const = default;

private:
    std::vector<Grid<Real>> planes_;
};

/// One z-plane of a stack; samples normalized to [0,1] at module boundaries.
using Slice = Image<double>;

/// Contiguous half-open z-window [z_begin, z_end) of a volume.
struct Slab {
    std::size_t z_begin = 0;
    std::size_t z_end = 0;
    std::vector<Slice> slices;

    [[nodiscard]] std::size_t size() const noexcept { return slices.size(); }
    [[nodiscard]] bool contains(std::size_t z) const noexcept { return z >= z_begin && z < z_end; }
    const Slice& at(std::size_t z) const {
        if (!contains(z)) {
            throw ArgumentError("slice " + std::to_string(z) + " outside slab [" + std::to_string(z_begin) +
                                ", " + std::to_string(z_end) + ")");
        }
        return slices[z - z_begin];
    }
};

template <std::floating_point Real>
[[nodiscard]] Real mean(const Grid<Real>& g) {
    long double acc = 0;
    for (Real v : g.values()) acc += v;
    return g.empty() ? Real(0) : static_cast<Real>(acc / static_cast<long double>(g.size()));
}

template <std::floating_point Real>
[[nodiscard]] Real max_abs_diff(const Grid<Real>& a, const Grid<Real>& b) {
    if (!a.same_shape(b)) throw ArgumentError("grid dimension mismatch");
    Real m = 0;
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) m = std::max(m, std::abs(av[i] - bv[i]));
    return m;
}

template <std::floating_point Real>
[[nodiscard]] Real max_abs_diff(const Image<Real>& a, const Image<Real>& b) {
    if (!a.same_shape(b)) throw ArgumentError("image dimension mismatch");
    Real m = 0;
    for (std::size_t c = 0; c < a.channels(); ++c) m = std::max(m, max_abs_diff(a.channel(c), b.channel(c)));
    return m;
}

[[nodiscard]] inline bool all_finite(std::span<const double> v) noexcept {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace zfuse
