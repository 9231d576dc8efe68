#include "linguist/digest.hpp"

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace linguist {
namespace {

// RFC 1321 reference constants.
constexpr std::array<std::uint32_t, 64> kSines = {
    0xd76aa478u, 0xe8c7b756u, 0x242070dbu, 0xc1bdceeeu, 0xf57c0fafu, 0x4787c62au,
    0xa8304613u, 0xfd469501u, 0x698098d8u, 0x8b44f7afu, 0xffff5bb1u, 0x895cd7beu,
    0x6b901122u, 0xfd987193u, 0xa679438eu, 0x49b40821u, 0xf61e2562u, 0xc040b340u,
    0x265e5a51u, 0xe9b6c7aau, 0xd62f105du, 0x02441453u, 0xd8a1e681u, 0xe7d3fbc8u,
    0x21e1cde6u, 0xc33707d6u, 0xf4d50d87u, 0x455a14edu, 0xa9e3e905u, 0xfcefa3f8u,
    0x676f02d9u, 0x8d2a4c8au, 0xfffa3942u, 0x8771f681u, 0x6d9d6122u, 0xfde5380cu,
    0xa4beea44u, 0x4bdecfa9u, 0xf6bb4b60u, 0xbebfbc70u, 0x289b7ec6u, 0xeaa127fau,
    0xd4ef3085u, 0x04881d05u, 0xd9d4d039u, 0xe6db99e5u, 0x1fa27cf8u, 0xc4ac5665u,
    0xf4292244u, 0x432aff97u, 0xab9423a7u, 0xfc93a039u, 0x655b59c3u, 0x8f0ccc92u,
    0xffeff47du, 0x85845dd1u, 0x6fa87e4fu, 0xfe2ce6e0u, 0xa3014314u, 0x4e0811a1u,
    0xf7537e82u, 0xbd3af235u, 0x2ad7d2bbu, 0xeb86d391u};

constexpr std::array<int, 64> kShifts = {
    7, 12, 17, 22, 7, 12, 17, 22, 7, 12, 17, 22, 7, 12, 17, 22,
    5, 9,  14, 20, 5, 9,  14, 20, 5, 9,  14, 20, 5, 9,  14, 20,
    4, 11, 16, 23, 4, 11, 16, 23, 4, 11, 16, 23, 4, 11, 16, 23,
    6, 10, 15, 21, 6, 10, 15, 21, 6, 10, 15, 21, 6, 10, 15, 21};

inline std::uint32_t rotl(std::uint32_t x, int s) { return (x << s) | (x >> (32 - s)); }

struct Md5State {
  std::uint32_t a = 0x67452301u;
  std::uint32_t b = 0xefcdab89u;
  std::uint32_t c = 0x98badcfeu;
  std::uint32_t d = 0x10325476u;
  std::uint64_t total = 0;
  unsigned char buffer[64];
  std::size_t buffered = 0;

  void process_block(const unsigned char* p) {
    std::uint32_t m[16];
    for (int i = 0; i < 16; ++i) {
      m[i] = static_cast<std::uint32_t>(p[i * 4]) |
             (static_cast<std::uint32_t>(p[i * 4 + 1]) << 8) |
             (static_cast<std::uint32_t>(p[i * 4 + 2]) << 16) |
             (static_cast<std::uint32_t>(p[i * 4 + 3]) << 24);
    }
    std::uint32_t A = a, B = b, C = c, D = d;
    for (int i = 0; i < 64; ++i) {
      std::uint32_t f;
      int g;
      if (i < 16) {
        f = (B & C) | (~B & D);
        g = i;
      } else if (i < 32) {
        f = (D & B) | (~D & C);
        g = (5 * i + 1) % 16;
      } else if (i < 48) {
        f = B ^ C ^ D;
        g = (3 * i + 5) % 16;
      } else {
        f = C ^ (B | ~D);
        g = (7 * i) % 16;
      }
      const std::uint32_t tmp = D;
      D = C;
      C = B;
      B = B + rotl(A + f + kSines[static_cast<std::size_t>(i)] + m[g],
                   kShifts[static_cast<std::size_t>(i)]);
      A = tmp;
    }
    a += A;
    b += B;
    c += C;
    d += D;
  }

  void update(const unsigned char* data, std::size_t len) {
    total += len;
    if (buffered > 0) {
      while (len > 0 && buffered < 64) {
        buffer[buffered++] = *data++;
        --len;
      }
      if (buffered == 64) {
        process_block(buffer);
        buffered = 0;
      }
    }
    while (len >= 64) {
      process_block(data);
      data += 64;
      len -= 64;
    }
    while (len > 0) {
      buffer[buffered++] = *data++;
      --len;
    }
  }

  std::string finish() {
    const std::uint64_t bit_len = total * 8;
    const unsigned char pad = 0x80;
    update(&pad, 1);
    const unsigned char zero = 0;
    while (buffered != 56) update(&zero, 1);
    unsigned char len_bytes[8];
    for (int i = 0; i < 8; ++i) len_bytes[i] = static_cast<unsigned char>(bit_len >> (8 * i));
    update(len_bytes, 8);

    unsigned char out[16];
    const std::uint32_t regs[4] = {a, b, c, d};
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        out[i * 4 + j] = static_cast<unsigned char>(regs[i] >> (8 * j));
      }
    }
    static const char* hex = "0123456789abcdef";
    std::string s(32, '0');
    for (int i = 0; i < 16; ++i) {
      s[static_cast<std::size_t>(i) * 2] = hex[out[i] >> 4];
      s[static_cast<std::size_t>(i) * 2 + 1] = hex[out[i] & 0xF];
    }
    return s;
  }
};

}  // namespace

std::string md5_hex(std::string_view data) {
  Md5State st;
  st.update(reinterpret_cast<const unsigned char*>(data.data()), data.size());
  return st.finish();
}

std::string md5_file_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file for hashing: " + path);
  Md5State st;
  char chunk[65536];
  while (in) {
    in.read(chunk, sizeof(chunk));
    const std::streamsize got = in.gcount();
    if (got > 0) {
      st.update(reinterpret_cast<const unsigned char*>(chunk), static_cast<std::size_t>(got));
    }
  }
  return st.finish();
}

}  // namespace linguist
