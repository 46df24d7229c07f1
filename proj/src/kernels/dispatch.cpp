#include <atomic>
#include <cstdlib>
#include <cstring>

#include "bellsim/kernels.hpp"

namespace bellsim::kernels {

namespace {

Isa detect() {
  if (const char* env = std::getenv("BELLSIM_KERNELS"); env && std::strcmp(env, "scalar") == 0) return Isa::kScalar;
  return avx2_available() ? Isa::kAvx2 : Isa::kScalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

const char* to_string(Isa isa) { return isa == Isa::kAvx2 ? "avx2" : "scalar"; }

bool avx2_available() {
#ifdef BELLSIM_HAVE_AVX2_KERNELS
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

bool set_isa(Isa isa) {
  if (isa == Isa::kAvx2 && !avx2_available()) {
    current().store(Isa::kScalar);
    return false;
  }
  current().store(isa);
  return true;
}

void bin_indices(std::span<const std::int64_t> diffs, std::int64_t lo, std::int64_t width, std::int32_t nbins,
                 std::span<std::int32_t> out) {
#ifdef BELLSIM_HAVE_AVX2_KERNELS
  if (active_isa() == Isa::kAvx2) return avx2::bin_indices(diffs, lo, width, nbins, out);
#endif
  scalar::bin_indices(diffs, lo, width, nbins, out);
}

void gate(std::span<const std::uint64_t> times, std::uint64_t period, std::uint64_t discard,
          std::span<std::uint64_t> interval, std::span<std::uint8_t> valid) {
#ifdef BELLSIM_HAVE_AVX2_KERNELS
  if (active_isa() == Isa::kAvx2) return avx2::gate(times, period, discard, interval, valid);
#endif
  scalar::gate(times, period, discard, interval, valid);
}

std::size_t count_within(std::span<const std::int64_t> diffs, std::int64_t center, std::int64_t half_width) {
#ifdef BELLSIM_HAVE_AVX2_KERNELS
  if (active_isa() == Isa::kAvx2) return avx2::count_within(diffs, center, half_width);
#endif
  return scalar::count_within(diffs, center, half_width);
}

}  // namespace bellsim::kernels
