#include "bellsim/timetag.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

#include "bellsim/error.hpp"

namespace bellsim {

namespace {

void put_u64_le(unsigned char* out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out[i] = static_cast<unsigned char>(v >> (8 * i));
}

std::uint64_t get_u64_le(const unsigned char* in) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[i]) << (8 * i);
  return v;
}

std::filesystem::path temp_sibling(const std::filesystem::path& path) {
  auto tmp = path;
  tmp += ".tmp";
  return tmp;
}

}  // namespace

bool is_time_sorted(std::span<const TimeTag> tags) {
  return std::is_sorted(tags.begin(), tags.end(),
                        [](TimeTag l, TimeTag r) { return l.time_ps() < r.time_ps(); });
}

void write_tag_file(std::span<const TimeTag> tags, const std::filesystem::path& path) {
  const auto tmp = temp_sibling(path);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::kInput, "cannot open " + tmp.string() + " for writing");
    constexpr std::size_t kChunk = 4096;
    std::vector<unsigned char> buf(kChunk * kTagRecordSize);
    for (std::size_t i = 0; i < tags.size(); i += kChunk) {
      const std::size_t n = std::min(kChunk, tags.size() - i);
      std::fill(buf.begin(), buf.end(), 0);
      for (std::size_t k = 0; k < n; ++k) {
        unsigned char* rec = buf.data() + k * kTagRecordSize;
        put_u64_le(rec, tags[i + k].time_ps());
        rec[8] = static_cast<unsigned char>(tags[i + k].channel());
        rec[9] = tags[i + k].setting_bit();
      }
      out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(n * kTagRecordSize));
    }
    if (!out) fail(ErrorKind::kInput, "write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

TagStream read_tag_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) fail(ErrorKind::kInput, "cannot open tag file " + path.string());
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes % kTagRecordSize != 0) {
    fail(ErrorKind::kInput, path.string() + ": size is not a multiple of the 16-byte record");
  }
  in.seekg(0);
  TagStream tags;
  tags.reserve(bytes / kTagRecordSize);
  constexpr std::size_t kChunk = 4096;
  std::vector<unsigned char> buf(kChunk * kTagRecordSize);
  std::size_t remaining = bytes / kTagRecordSize;
  std::size_t index = 0;
  while (remaining > 0) {
    const std::size_t n = std::min(kChunk, remaining);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * kTagRecordSize));
    if (!in) fail(ErrorKind::kInput, path.string() + ": truncated read");
    for (std::size_t k = 0; k < n; ++k, ++index) {
      const unsigned char* rec = buf.data() + k * kTagRecordSize;
      const std::uint64_t t = get_u64_le(rec);
      if (t > TimeTag::kMaxTime || rec[8] > 1 || rec[9] > 1) {
        std::ostringstream os;
        os << path.string() << ": invalid record " << index;
        fail(ErrorKind::kInput, os.str());
      }
      tags.emplace_back(t, static_cast<Channel>(rec[8]), rec[9]);
    }
    remaining -= n;
  }
  return tags;
}

void write_tag_csv(std::span<const TimeTag> tags, const std::filesystem::path& path) {
  const auto tmp = temp_sibling(path);
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) fail(ErrorKind::kInput, "cannot open " + tmp.string() + " for writing");
    out << "time_ps,channel,setting\n";
    std::string line;
    std::array<char, 32> num{};
    for (const auto& tag : tags) {
      auto [end, ec] = std::to_chars(num.data(), num.data() + num.size(), tag.time_ps());
      line.assign(num.data(), end);
      line += ',';
      line += static_cast<char>('0' + static_cast<int>(tag.channel()));
      line += ',';
      line += static_cast<char>('0' + tag.setting_bit());
      line += '\n';
      out << line;
    }
    if (!out) fail(ErrorKind::kInput, "write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

TagStream read_tag_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kInput, "cannot open " + path.string());
  TagStream tags;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("time_ps", 0) == 0) continue;
    if (line.empty()) continue;
    std::uint64_t t = 0;
    unsigned ch = 0, bit = 0;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    auto r1 = std::from_chars(p, end, t);
    bool ok = r1.ec == std::errc{} && r1.ptr < end && *r1.ptr == ',';
    if (ok) {
      auto r2 = std::from_chars(r1.ptr + 1, end, ch);
      ok = r2.ec == std::errc{} && r2.ptr < end && *r2.ptr == ',';
      if (ok) {
        auto r3 = std::from_chars(r2.ptr + 1, end, bit);
        ok = r3.ec == std::errc{} && r3.ptr == end;
      }
    }
    if (!ok || ch > 1 || bit > 1 || t > TimeTag::kMaxTime) {
      std::ostringstream os;
      os << path.string() << ":" << line_no << ": malformed tag record";
      fail(ErrorKind::kInput, os.str());
    }
    tags.emplace_back(t, static_cast<Channel>(ch), static_cast<std::uint8_t>(bit));
  }
  return tags;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = temp_sibling(path);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::kInput, "cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out) fail(ErrorKind::kInput, "write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace bellsim
