/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

namespace ledgerbus {

/// Structured value: maps, lists, strings, booleans, 64-bit integers and
/// finite doubles. Objects keep their keys sorted by byte value.
using Value = nlohmann::json;

class SerializationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a well-formed value does not have the shape a decoder expects.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Deterministic text encoding: sorted keys, no whitespace, integers in plain
/// decimal, doubles in shortest round-trip form (integral doubles keep a
/// trailing ".0" so the number kind survives a round trip).
///
/// Throws SerializationError on null, non-finite numbers, unsigned integers
/// beyond the int64 range and strings that are not valid UTF-8.
std::string canonical_serialize(const Value &value);

/// Parses text produced by canonical_serialize. With `strict`, the input must
/// be byte-identical to the canonical form of the parsed value.
Value parse_canonical(std::string_view text, bool strict = true);

// Field accessors that translate shape errors into SchemaError.
const Value &require_field(const Value &obj, std::string_view key);
std::string require_string(const Value &obj, std::string_view key);
std::int64_t require_int(const Value &obj, std::string_view key);
bool require_bool(const Value &obj, std::string_view key);
const Value &require_array(const Value &obj, std::string_view key);
const Value &require_object(const Value &obj, std::string_view key);

/// Rejects objects with keys outside `allowed`.
void require_only_keys(const Value &obj,
                       std::initializer_list<std::string_view> allowed);

}  // namespace ledgerbus
