#pragma once

#include <cstddef>
#include <new>

namespace prnet::memory {

// Byte counters for tensor storage. Updated by TrackingAllocator.
std::size_t live_bytes() noexcept;
std::size_t peak_bytes() noexcept;
/// Resets the high-water mark to the current live byte count.
void reset_peak() noexcept;

void note_allocation(std::size_t bytes) noexcept;
void note_release(std::size_t bytes) noexcept;

inline constexpr std::size_t kAlignment = 64;

template <typename T>
struct TrackingAllocator {
  using value_type = T;

  TrackingAllocator() noexcept = default;
  template <typename U>
  TrackingAllocator(const TrackingAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    const std::size_t bytes = n * sizeof(T);
    auto* p = static_cast<T*>(::operator new(bytes, std::align_val_t{kAlignment}));
    note_allocation(bytes);
    return p;
  }

  void deallocate(T* p, std::size_t n) noexcept {
    ::operator delete(p, std::align_val_t{kAlignment});
    note_release(n * sizeof(T));
  }

  template <typename U>
  bool operator==(const TrackingAllocator<U>&) const noexcept {
    return true;
  }
};

}  // namespace prnet::memory
