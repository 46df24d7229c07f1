#include "bellsim/kernels.hpp"

namespace bellsim::kernels::scalar {

void bin_indices(std::span<const std::int64_t> diffs, std::int64_t lo, std::int64_t width, std::int32_t nbins,
                 std::span<std::int32_t> out) {
  const std::int64_t span = width * nbins;
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    const std::int64_t rel = diffs[i] - lo;
    out[i] = (rel >= 0 && rel < span) ? static_cast<std::int32_t>(rel / width) : -1;
  }
}

void gate(std::span<const std::uint64_t> times, std::uint64_t period, std::uint64_t discard,
          std::span<std::uint64_t> interval, std::span<std::uint8_t> valid) {
  for (std::size_t i = 0; i < times.size(); ++i) {
    interval[i] = times[i] / period;
    valid[i] = static_cast<std::uint8_t>(times[i] % period >= discard);
  }
}

std::size_t count_within(std::span<const std::int64_t> diffs, std::int64_t center, std::int64_t half_width) {
  std::size_t n = 0;
  const std::int64_t lo = center - half_width;
  const std::int64_t hi = center + half_width;
  for (const std::int64_t d : diffs) n += (d >= lo && d <= hi) ? 1 : 0;
  return n;
}

}  // namespace bellsim::kernels::scalar
