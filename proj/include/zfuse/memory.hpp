#pragma once

#include <atomic>
#include <cstddef>
#include <memory>
#include <new>

namespace zfuse {

/// Process-wide accounting of bytes held in sample buffers.
///
/// Every Grid/Image allocates through TrackingAllocator, so the peak reported
/// here is the working set of pixel data (window, solver hierarchy, scratch).
/// Codec-internal buffers of libpng are not included.
class MemoryTracker {
public:
    static MemoryTracker& instance() noexcept {
        static MemoryTracker tracker;
        return tracker;
    }

    void on_allocate(std::size_t bytes) noexcept {
        const std::size_t now = current_.fetch_add(bytes, std::memory_order_relaxed) + bytes;
        std::size_t peak = peak_.load(std::memory_order_relaxed);
        while (now > peak && !peak_.compare_exchange_weak(peak, now, std::memory_order_relaxed)) {
        }
    }

    void on_deallocate(std::size_t bytes) noexcept {
        current_.fetch_sub(bytes, std::memory_order_relaxed);
    }

    [[nodiscard]] std::size_t current_bytes() const noexcept {
        return current_.load(std::memory_order_relaxed);
    }
    [[nodiscard]] std::size_t peak_bytes() const noexcept {
        return peak_.load(std::memory_order_relaxed);
    }

    /// Restarts peak tracking from the bytes currently live.
    void reset_peak() noexcept { peak_.store(current_.load(std::memory_order_relaxed)); }

private:
    MemoryTracker() = default;
    std::atomic<std::size_t> current_{0};
    std::atomic<std::size_t> peak_{0};
};

template <class T>
struct TrackingAllocator {
    using value_type = T;

    TrackingAllocator() noexcept = default;
    template <class U>
    TrackingAllocator(const TrackingAllocator<U>&) noexcept {}

    [[nodiscard]] T* allocate(std::size_t n) {
        T* p = std::allocator<T>{}.allocate(n);
        MemoryTracker::instance().on_allocate(n * sizeof(T));
        return p;
    }

    void deallocate(T* p, std::size_t n) noexcept {
        MemoryTracker::instance().on_deallocate(n * sizeof(T));
        std::allocator<T>{}.deallocate(p, n);
    }

    template <class U>
    bool operator==(const TrackingAllocator<U>&) const noexcept { return true; }
};

}  // namespace zfuse
