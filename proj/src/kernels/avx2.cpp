// Compiled with -mavx2; only reached when the CPU reports AVX2 at runtime.
#include <immintrin.h>

#include <bit>

#include "bellsim/kernels.hpp"

namespace bellsim::kernels::avx2 {

namespace {

constexpr std::int64_t kTwo52 = std::int64_t{1} << 52;
constexpr std::int64_t kMagicBits = 0x4330000000000000LL;  // bit pattern of 2^52

// Exact for 0 <= x < 2^52.
inline __m256d u64_to_pd(__m256i x) {
  return _mm256_sub_pd(_mm256_castsi256_pd(_mm256_or_si256(x, _mm256_set1_epi64x(kMagicBits))),
                       _mm256_set1_pd(static_cast<double>(kTwo52)));
}

// Exact for integer-valued 0 <= y < 2^52.
inline __m256i pd_to_u64(__m256d y) {
  return _mm256_xor_si256(_mm256_castpd_si256(_mm256_add_pd(y, _mm256_set1_pd(static_cast<double>(kTwo52)))),
                          _mm256_set1_epi64x(kMagicBits));
}

// floor(num / den) for non-negative integer-valued doubles below 2^52,
// corrected so that q * den <= num < (q + 1) * den holds exactly.
inline __m256d exact_floor_div(__m256d num, __m256d den, __m256d* remainder) {
  __m256d q = _mm256_floor_pd(_mm256_div_pd(num, den));
  __m256d rem = _mm256_sub_pd(num, _mm256_mul_pd(q, den));
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d too_big = _mm256_cmp_pd(rem, _mm256_setzero_pd(), _CMP_LT_OQ);
  q = _mm256_sub_pd(q, _mm256_and_pd(too_big, one));
  rem = _mm256_add_pd(rem, _mm256_and_pd(too_big, den));
  const __m256d too_small = _mm256_cmp_pd(rem, den, _CMP_GE_OQ);
  q = _mm256_add_pd(q, _mm256_and_pd(too_small, one));
  rem = _mm256_sub_pd(rem, _mm256_and_pd(too_small, den));
  *remainder = rem;
  return q;
}

}  // namespace

void bin_indices(std::span<const std::int64_t> diffs, std::int64_t lo, std::int64_t width, std::int32_t nbins,
                 std::span<std::int32_t> out) {
  const std::int64_t span = width * nbins;
  if (span >= kTwo52) {
    scalar::bin_indices(diffs, lo, width, nbins, out);
    return;
  }
  const __m256i lo_v = _mm256_set1_epi64x(lo);
  const __m256i span_v = _mm256_set1_epi64x(span);
  const __m256i minus_one64 = _mm256_set1_epi64x(-1);
  const __m256d width_d = _mm256_set1_pd(static_cast<double>(width));
  const __m256i pick_low = _mm256_setr_epi32(0, 2, 4, 6, 0, 2, 4, 6);
  const __m128i minus_one32 = _mm_set1_epi32(-1);

  std::size_t i = 0;
  const std::size_t n = diffs.size();
  for (; i + 4 <= n; i += 4) {
    const __m256i d = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(diffs.data() + i));
    const __m256i rel = _mm256_sub_epi64(d, lo_v);
    const __m256i inside = _mm256_and_si256(_mm256_cmpgt_epi64(rel, minus_one64), _mm256_cmpgt_epi64(span_v, rel));
    const __m256i rel_clamped = _mm256_and_si256(rel, inside);
    __m256d rem;
    const __m256d q = exact_floor_div(u64_to_pd(rel_clamped), width_d, &rem);
    const __m128i idx = _mm256_cvttpd_epi32(q);
    const __m128i mask32 = _mm256_castsi256_si128(_mm256_permutevar8x32_epi32(inside, pick_low));
    _mm_storeu_si128(reinterpret_cast<__m128i*>(out.data() + i), _mm_blendv_epi8(minus_one32, idx, mask32));
  }
  scalar::bin_indices(diffs.subspan(i), lo, width, nbins, out.subspan(i));
}

void gate(std::span<const std::uint64_t> times, std::uint64_t period, std::uint64_t discard,
          std::span<std::uint64_t> interval, std::span<std::uint8_t> valid) {
  if (period == 0 || period >= static_cast<std::uint64_t>(kTwo52) || discard >= static_cast<std::uint64_t>(kTwo52)) {
    scalar::gate(times, period, discard, interval, valid);
    return;
  }
  const __m256d period_d = _mm256_set1_pd(static_cast<double>(period));
  const __m256d discard_d = _mm256_set1_pd(static_cast<double>(discard));
  std::size_t i = 0;
  const std::size_t n = times.size();
  for (; i + 4 <= n; i += 4) {
    const __m256i t = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(times.data() + i));
    if (!_mm256_testz_si256(_mm256_srli_epi64(t, 52), _mm256_srli_epi64(t, 52))) {
      scalar::gate(times.subspan(i, 4), period, discard, interval.subspan(i, 4), valid.subspan(i, 4));
      continue;
    }
    __m256d phase;
    const __m256d k = exact_floor_div(u64_to_pd(t), period_d, &phase);
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(interval.data() + i), pd_to_u64(k));
    const int m = _mm256_movemask_pd(_mm256_cmp_pd(phase, discard_d, _CMP_GE_OQ));
    valid[i] = static_cast<std::uint8_t>(m & 1);
    valid[i + 1] = static_cast<std::uint8_t>((m >> 1) & 1);
    valid[i + 2] = static_cast<std::uint8_t>((m >> 2) & 1);
    valid[i + 3] = static_cast<std::uint8_t>((m >> 3) & 1);
  }
  scalar::gate(times.subspan(i), period, discard, interval.subspan(i), valid.subspan(i));
}

std::size_t count_within(std::span<const std::int64_t> diffs, std::int64_t center, std::int64_t half_width) {
  const __m256i lo = _mm256_set1_epi64x(center - half_width);
  const __m256i hi = _mm256_set1_epi64x(center + half_width);
  std::size_t total = 0;
  std::size_t i = 0;
  const std::size_t n = diffs.size();
  for (; i + 4 <= n; i += 4) {
    const __m256i d = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(diffs.data() + i));
    const __m256i outside = _mm256_or_si256(_mm256_cmpgt_epi64(lo, d), _mm256_cmpgt_epi64(d, hi));
    const int m = _mm256_movemask_pd(_mm256_castsi256_pd(outside));
    total += 4 - static_cast<std::size_t>(std::popcount(static_cast<unsigned>(m)));
  }
  return total + scalar::count_within(diffs.subspan(i), center, half_width);
}

}  // namespace bellsim::kernels::avx2
