#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace bellsim {

enum class Channel : std::uint8_t { kTransmitted = 0, kReflected = 1 };

/// One detection record packed into 64 bits: time in picoseconds (62 bits),
/// detector channel, active setting bit. Ordering by the raw word orders by
/// time first.
class TimeTag {
 public:
  static constexpr std::uint64_t kMaxTime = (std::uint64_t{1} << 62) - 1;

  constexpr TimeTag() = default;
  constexpr TimeTag(std::uint64_t time_ps, Channel channel, std::uint8_t setting_bit)
      : word_((time_ps << 2) | (static_cast<std::uint64_t>(channel) << 1) | (setting_bit & 1U)) {}

  constexpr std::uint64_t time_ps() const { return word_ >> 2; }
  constexpr Channel channel() const { return static_cast<Channel>((word_ >> 1) & 1U); }
  constexpr std::uint8_t setting_bit() const { return static_cast<std::uint8_t>(word_ & 1U); }
  /// +1 for the transmitted port, -1 for the reflected one.
  constexpr int outcome() const { return channel() == Channel::kTransmitted ? 1 : -1; }
  constexpr std::uint64_t raw() const { return word_; }

  constexpr TimeTag with_time(std::uint64_t time_ps) const { return TimeTag(time_ps, channel(), setting_bit()); }

  friend constexpr bool operator==(TimeTag, TimeTag) = default;
  friend constexpr bool operator<(TimeTag l, TimeTag r) { return l.word_ < r.word_; }

 private:
  std::uint64_t word_ = 0;
};

using TagStream = std::vector<TimeTag>;

bool is_time_sorted(std::span<const TimeTag> tags);

/// Binary stream file: little-endian 16-byte records
/// { u64 time_ps, u8 channel, u8 setting_bit, 6 reserved zero bytes }.
inline constexpr std::size_t kTagRecordSize = 16;

void write_tag_file(std::span<const TimeTag> tags, const std::filesystem::path& path);
TagStream read_tag_file(const std::filesystem::path& path);

/// CSV mirror with header "time_ps,channel,setting".
void write_tag_csv(std::span<const TimeTag> tags, const std::filesystem::path& path);
TagStream read_tag_csv(const std::filesystem::path& path);

/// Write via a temporary sibling and rename, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace bellsim
