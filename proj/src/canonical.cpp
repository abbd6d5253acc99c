/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "ledgerbus/canonical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ledgerbus {

namespace {

void check_encodable(const Value &v) {
  switch (v.type()) {
    case Value::value_t::null:
      throw SerializationError("null is not encodable");
    case Value::value_t::number_float:
      if (!std::isfinite(v.get<double>())) {
        throw SerializationError("non-finite number");
      }
      return;
    case Value::value_t::number_unsigned:
      if (v.get<std::uint64_t>() >
          static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
        throw SerializationError("integer exceeds int64 range");
      }
      return;
    case Value::value_t::object:
      for (const auto &[k, child] : v.items()) check_encodable(child);
      return;
    case Value::value_t::array:
      for (const auto &child : v) check_encodable(child);
      return;
    case Value::value_t::binary:
    case Value::value_t::discarded:
      throw SerializationError("unsupported value kind");
    default:
      return;
  }
}

}  // namespace

std::string canonical_serialize(const Value &value) {
  check_encodable(value);
  try {
    return value.dump();
  } catch (const nlohmann::json::exception &e) {
    throw SerializationError(e.what());
  }
}

Value parse_canonical(std::string_view text, bool strict) {
  Value v;
  try {
    v = Value::parse(text);
  } catch (const nlohmann::json::exception &e) {
    throw SerializationError(e.what());
  }
  if (strict) {
    std::string again = canonical_serialize(v);
    if (again != text) throw SerializationError("input is not in canonical form");
  } else {
    check_encodable(v);
  }
  return v;
}

const Value &require_field(const Value &obj, std::string_view key) {
  if (!obj.is_object()) throw SchemaError("expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError("missing field '" + std::string(key) + "'");
  return *it;
}

std::string require_string(const Value &obj, std::string_view key) {
  const auto &v = require_field(obj, key);
  if (!v.is_string()) throw SchemaError("field '" + std::string(key) + "' must be a string");
  return v.get<std::string>();
}

std::int64_t require_int(const Value &obj, std::string_view key) {
  const auto &v = require_field(obj, key);
  if (!v.is_number_integer()) {
    throw SchemaError("field '" + std::string(key) + "' must be an integer");
  }
  if (v.is_number_unsigned() &&
      v.get<std::uint64_t>() >
          static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
    throw SchemaError("field '" + std::string(key) + "' out of range");
  }
  return v.get<std::int64_t>();
}

bool require_bool(const Value &obj, std::string_view key) {
  const auto &v = require_field(obj, key);
  if (!v.is_boolean()) throw SchemaError("field '" + std::string(key) + "' must be a boolean");
  return v.get<bool>();
}

const Value &require_array(const Value &obj, std::string_view key) {
  const auto &v = require_field(obj, key);
  if (!v.is_array()) throw SchemaError("field '" + std::string(key) + "' must be a list");
  return v;
}

const Value &require_object(const Value &obj, std::string_view key) {
  const auto &v = require_field(obj, key);
  if (!v.is_object()) throw SchemaError("field '" + std::string(key) + "' must be a map");
  return v;
}

void require_only_keys(const Value &obj,
                       std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw SchemaError("expected an object");
  for (const auto &[k, v] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      throw SchemaError("unexpected field '" + k + "'");
    }
  }
}

}  // namespace ledgerbus
