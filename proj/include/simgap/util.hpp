#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace simgap {

/// 64-bit FNV-1a; stable across platforms, used for provenance hashes.
class Fnv1a {
 public:
  void update(std::string_view bytes);
  void update(std::span<const double> values);
  void update(std::uint64_t value);
  std::uint64_t value() const { return h_; }
  std::string hex() const;

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

std::string hash_hex(std::string_view bytes);
std::string hash_file(const std::filesystem::path& path);

/// Shortest decimal that round-trips the double (at most 17 significant digits).
std::string format_double(double v);

/// Current UTC time as ISO-8601.
std::string utc_timestamp();

std::string read_text(const std::filesystem::path& path);
/// Writes via a temporary file and rename.
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace simgap
