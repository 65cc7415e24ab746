#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace repro::digest {

using Sha256 = std::array<uint8_t, 32>;

// Incremental SHA-256.
class Sha256Stream {
 public:
  Sha256Stream();
  ~Sha256Stream();
  Sha256Stream(const Sha256Stream&) = delete;
  Sha256Stream& operator=(const Sha256Stream&) = delete;

  void update(const void* data, std::size_t len);
  void update(std::string_view s) { update(s.data(), s.size()); }
  void update_u64(uint64_t v);  // little-endian framing
  Sha256 finish();

 private:
  void* ctx_;
};

Sha256 sha256(std::string_view data);
std::string to_hex(const Sha256& d);

}  // namespace repro::digest
