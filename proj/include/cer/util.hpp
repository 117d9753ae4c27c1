#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cer {

std::string sha256_hex(std::string_view data);
std::string sha256_hex(std::span<const std::byte> data);

std::string base64_encode(std::string_view data);
std::string base64_decode(std::string_view data);

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// First 16 hex digits of SHA-256 folded into an integer seed.
std::uint64_t stable_hash64(std::string_view data);

struct Url {
  std::string scheme;  // "http" or "https"
  std::string host;
  int port = 0;
  std::string path;  // includes query, starts with '/'

  std::string origin() const;  // scheme://host:port
};

/// Parses absolute http/https URLs; nullopt otherwise.
std::optional<Url> parse_url(std::string_view url);

/// Resolves a Location header against the URL that produced it.
std::string resolve_location(const Url& base, std::string_view location);

std::string url_encode(std::string_view s);

/// ISO-8601 UTC with second precision, e.g. 2024-05-01T12:00:00Z.
std::string format_utc(std::chrono::system_clock::time_point tp);
std::chrono::system_clock::time_point parse_utc(std::string_view s);

std::string read_file(const std::string& path);
void write_file_atomic(const std::string& path, std::string_view contents);

}  // namespace cer
