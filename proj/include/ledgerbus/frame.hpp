/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ledgerbus::net {

// Wire values are fixed; new types must take new numbers.
enum class FrameType : std::uint8_t {
  Publish = 0x01,
  Subscribe = 0x02,
  Unsubscribe = 0x03,
  Ack = 0x04,
  Deliver = 0x05,
  Proposal = 0x10,
  Vote = 0x11,
  TxGossip = 0x12,
  QueryHeight = 0x20,
  QueryBlock = 0x21,
  QueryResp = 0x22,
  Error = 0x7f,
};

inline constexpr std::size_t kFrameHeaderSize = 5;
inline constexpr std::size_t kMaxFrameBody = 1u << 20;

std::string_view to_string(FrameType t);
std::optional<FrameType> frame_type_from_byte(std::uint8_t b);

enum class FrameErrc { FrameTooLarge, Truncated, UnknownType, TrailingBytes };
std::string_view to_string(FrameErrc e);

class FrameError : public std::runtime_error {
 public:
  FrameError(FrameErrc code, const std::string &what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  FrameErrc code() const { return code_; }

 private:
  FrameErrc code_;
};

/// type (1 byte) || body length (4 bytes, big-endian) || body.
struct Frame {
  FrameType type = FrameType::Error;
  std::string body;

  std::size_t wire_size() const { return kFrameHeaderSize + body.size(); }
  bool operator==(const Frame &) const = default;
};

std::string encode_frame(const Frame &f);

/// Decodes exactly one frame occupying all of `bytes`.
Frame decode_frame(std::string_view bytes);

/// Incremental decoding for stream transports. Returns the body length
/// announced by a complete header, validating type and size.
std::size_t parse_frame_header(std::string_view header, FrameType *type);

/// Pops one complete frame from the front of `buffer`, if present.
std::optional<Frame> try_pop_frame(std::string &buffer);

}  // namespace ledgerbus::net
