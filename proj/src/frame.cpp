/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "ledgerbus/frame.hpp"

namespace ledgerbus::net {

std::string_view to_string(FrameType t) {
  switch (t) {
    case FrameType::Publish:
      return "Publish";
    case FrameType::Subscribe:
      return "Subscribe";
    case FrameType::Unsubscribe:
      return "Unsubscribe";
    case FrameType::Ack:
      return "Ack";
    case FrameType::Deliver:
      return "Deliver";
    case FrameType::Proposal:
      return "Proposal";
    case FrameType::Vote:
      return "Vote";
    case FrameType::TxGossip:
      return "TxGossip";
    case FrameType::QueryHeight:
      return "QueryHeight";
    case FrameType::QueryBlock:
      return "QueryBlock";
    case FrameType::QueryResp:
      return "QueryResp";
    case FrameType::Error:
      return "Error";
  }
  return "Unknown";
}

std::optional<FrameType> frame_type_from_byte(std::uint8_t b) {
  switch (b) {
    case 0x01:
    case 0x02:
    case 0x03:
    case 0x04:
    case 0x05:
    case 0x10:
    case 0x11:
    case 0x12:
    case 0x20:
    case 0x21:
    case 0x22:
    case 0x7f:
      return static_cast<FrameType>(b);
    default:
      return std::nullopt;
  }
}

std::string_view to_string(FrameErrc e) {
  switch (e) {
    case FrameErrc::FrameTooLarge:
      return "FrameTooLarge";
    case FrameErrc::Truncated:
      return "Truncated";
    case FrameErrc::UnknownType:
      return "UnknownType";
    case FrameErrc::TrailingBytes:
      return "TrailingBytes";
  }
  return "FrameError";
}

std::string encode_frame(const Frame &f) {
  if (f.body.size() > kMaxFrameBody) {
    throw FrameError(FrameErrc::FrameTooLarge,
                     std::to_string(f.body.size()) + " byte body exceeds the 1 MiB cap");
  }
  const auto n = static_cast<std::uint32_t>(f.body.size());
  std::string out;
  out.reserve(kFrameHeaderSize + f.body.size());
  out.push_back(static_cast<char>(f.type));
  out.push_back(static_cast<char>((n >> 24) & 0xff));
  out.push_back(static_cast<char>((n >> 16) & 0xff));
  out.push_back(static_cast<char>((n >> 8) & 0xff));
  out.push_back(static_cast<char>(n & 0xff));
  out += f.body;
  return out;
}

std::size_t parse_frame_header(std::string_view header, FrameType *type) {
  if (header.size() < kFrameHeaderSize) {
    throw FrameError(FrameErrc::Truncated, "frame header needs 5 bytes");
  }
  auto byte = [&](std::size_t i) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(header[i]));
  };
  auto t = frame_type_from_byte(static_cast<std::uint8_t>(byte(0)));
  if (!t) throw FrameError(FrameErrc::UnknownType, "type byte " + std::to_string(byte(0)));
  const std::uint32_t n = (byte(1) << 24) | (byte(2) << 16) | (byte(3) << 8) | byte(4);
  if (n > kMaxFrameBody) {
    throw FrameError(FrameErrc::FrameTooLarge, std::to_string(n) + " byte body announced");
  }
  if (type) *type = *t;
  return n;
}

Frame decode_frame(std::string_view bytes) {
  Frame f;
  const std::size_t n = parse_frame_header(bytes, &f.type);
  if (bytes.size() - kFrameHeaderSize < n) {
    throw FrameError(FrameErrc::Truncated, "body shorter than announced length");
  }
  if (bytes.size() - kFrameHeaderSize > n) {
    throw FrameError(FrameErrc::TrailingBytes, "bytes after the frame body");
  }
  f.body.assign(bytes.substr(kFrameHeaderSize));
  return f;
}

std::optional<Frame> try_pop_frame(std::string &buffer) {
  if (buffer.size() < kFrameHeaderSize) return std::nullopt;
  Frame f;
  const std::size_t n = parse_frame_header(buffer, &f.type);
  if (buffer.size() < kFrameHeaderSize + n) return std::nullopt;
  f.body = buffer.substr(kFrameHeaderSize, n);
  buffer.erase(0, kFrameHeaderSize + n);
  return f;
}

}  // namespace ledgerbus::net
