#pragma once
#include <array>
#include <cstdint>
#include <cstring>
#include <string>

namespace altlab {

// Plain SHA-1 (FIPS 180-1), used only to fingerprint resolved configs.
inline std::string sha1_hex(const void* data, std::size_t len) {
  std::uint32_t h[5] = {0x67452301u, 0xEFCDAB89u, 0x98BADCFEu, 0x10325476u, 0xC3D2E1F0u};

  const auto* bytes = static_cast<const std::uint8_t*>(data);
  const std::uint64_t total_bits = static_cast<std::uint64_t>(len) * 8;

  // message + 0x80 + zero pad + 64-bit big-endian length, in 64-byte blocks
  const std::size_t padded = ((len + 8) / 64 + 1) * 64;
  std::string buf(padded, '\0');
  std::memcpy(buf.data(), bytes, len);
  buf[len] = static_cast<char>(0x80);
  for (int i = 0; i < 8; ++i)
    buf[padded - 1 - i] = static_cast<char>((total_bits >> (8 * i)) & 0xFF);

  auto rol = [](std::uint32_t v, int s) { return (v << s) | (v >> (32 - s)); };
  std::uint32_t w[80];
  for (std::size_t block = 0; block < padded; block += 64) {
    for (int t = 0; t < 16; ++t) {
      const auto* p = reinterpret_cast<const std::uint8_t*>(buf.data() + block + 4 * t);
      w[t] = (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) |
             std::uint32_t(p[3]);
    }
    for (int t = 16; t < 80; ++t) w[t] = rol(w[t - 3] ^ w[t - 8] ^ w[t - 14] ^ w[t - 16], 1);

    std::uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4];
    for (int t = 0; t < 80; ++t) {
      std::uint32_t f, k;
      if (t < 20) {
        f = (b & c) | ((~b) & d);
        k = 0x5A827999u;
      } else if (t < 40) {
        f = b ^ c ^ d;
        k = 0x6ED9EBA1u;
      } else if (t < 60) {
        f = (b & c) | (b & d) | (c & d);
        k = 0x8F1BBCDCu;
      } else {
        f = b ^ c ^ d;
        k = 0xCA62C1D6u;
      }
      const std::uint32_t tmp = rol(a, 5) + f + e + k + w[t];
      e = d;
      d = c;
      c = rol(b, 30);
      b = a;
      a = tmp;
    }
    h[0] += a;
    h[1] += b;
    h[2] += c;
    h[3] += d;
    h[4] += e;
  }

  static const char* hexd = "0123456789abcdef";
  std::string out(40, '0');
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 4; ++j) {
      const std::uint8_t byte = (h[i] >> (24 - 8 * j)) & 0xFF;
      out[8 * i + 2 * j] = hexd[byte >> 4];
      out[8 * i + 2 * j + 1] = hexd[byte & 0xF];
    }
  return out;
}

inline std::string sha1_hex(const std::string& s) { return sha1_hex(s.data(), s.size()); }

}  // namespace altlab
