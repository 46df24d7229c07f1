#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

// Data-parallel inner loops of the stream analysis. Every kernel has a scalar
// reference in kernels::scalar and, on x86-64, an AVX2 variant selected at
// runtime. Both produce bit-identical output.

namespace bellsim::kernels {

enum class Isa { kScalar, kAvx2 };

const char* to_string(Isa isa);
bool avx2_available();
Isa active_isa();
/// Force a variant (tests, benchmarking). Requesting an unavailable ISA
/// falls back to scalar and returns false.
bool set_isa(Isa isa);

/// out[i] = floor((diffs[i] - lo) / width) when lo <= diffs[i] < lo + nbins * width,
/// otherwise -1. Requires width > 0 and out.size() >= diffs.size().
void bin_indices(std::span<const std::int64_t> diffs, std::int64_t lo, std::int64_t width, std::int32_t nbins,
                 std::span<std::int32_t> out);

/// For each time t: interval[i] = t / period, valid[i] = (t % period) >= discard.
void gate(std::span<const std::uint64_t> times, std::uint64_t period, std::uint64_t discard,
          std::span<std::uint64_t> interval, std::span<std::uint8_t> valid);

/// Number of diffs with |d - center| <= half_width.
std::size_t count_within(std::span<const std::int64_t> diffs, std::int64_t center, std::int64_t half_width);

namespace scalar {
void bin_indices(std::span<const std::int64_t> diffs, std::int64_t lo, std::int64_t width, std::int32_t nbins,
                 std::span<std::int32_t> out);
void gate(std::span<const std::uint64_t> times, std::uint64_t period, std::uint64_t discard,
          std::span<std::uint64_t> interval, std::span<std::uint8_t> valid);
std::size_t count_within(std::span<const std::int64_t> diffs, std::int64_t center, std::int64_t half_width);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define BELLSIM_HAVE_AVX2_KERNELS 1
namespace avx2 {
void bin_indices(std::span<const std::int64_t> diffs, std::int64_t lo, std::int64_t width, std::int32_t nbins,
                 std::span<std::int32_t> out);
void gate(std::span<const std::uint64_t> times, std::uint64_t period, std::uint64_t discard,
          std::span<std::uint64_t> interval, std::span<std::uint8_t> valid);
std::size_t count_within(std::span<const std::int64_t> diffs, std::int64_t center, std::int64_t half_width);
}  // namespace avx2
#endif

}  // namespace bellsim::kernels
