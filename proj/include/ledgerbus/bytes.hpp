/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <cstring>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ledgerbus {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

/// Raised when a key, signature, digest or hex string has the wrong shape.
class FormatError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string to_hex(ByteView bytes);

/// Strict lowercase hex decoding. Uppercase digits are rejected so that every
/// byte string has exactly one textual form.
Bytes from_hex(std::string_view hex);

inline ByteView as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t *>(s.data()), s.size()};
}

template <std::size_t N, typename Tag>
struct FixedBytes {
  static constexpr std::size_t kSize = N;

  std::array<std::uint8_t, N> data{};

  static FixedBytes from_span(ByteView bytes) {
    if (bytes.size() != N) {
      throw FormatError("expected " + std::to_string(N) + " bytes, got " +
                        std::to_string(bytes.size()));
    }
    FixedBytes out;
    std::memcpy(out.data.data(), bytes.data(), N);
    return out;
  }

  static FixedBytes from_hex(std::string_view hex) {
    return from_span(ledgerbus::from_hex(hex));
  }

  std::string hex() const { return to_hex(data); }
  ByteView view() const { return data; }

  bool is_zero() const {
    for (auto b : data) {
      if (b != 0) return false;
    }
    return true;
  }

  auto operator<=>(const FixedBytes &) const = default;
};

struct HashTag {};
using Hash256 = FixedBytes<32, HashTag>;

Hash256 sha256(ByteView bytes);
inline Hash256 sha256(std::string_view bytes) { return sha256(as_bytes(bytes)); }

/// H(prefix || bytes), used for domain-separated tree hashing.
Hash256 sha256_prefixed(std::uint8_t prefix, ByteView bytes);
Hash256 sha256_prefixed(std::uint8_t prefix, ByteView left, ByteView right);

}  // namespace ledgerbus

template <std::size_t N, typename Tag>
struct std::hash<ledgerbus::FixedBytes<N, Tag>> {
  std::size_t operator()(const ledgerbus::FixedBytes<N, Tag> &v) const noexcept {
    std::size_t h;
    static_assert(N >= sizeof(h));
    std::memcpy(&h, v.data.data(), sizeof(h));
    return h;
  }
};
