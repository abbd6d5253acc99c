/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ledgerbus::contract {

class FilterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr char kLevelSeparator = '/';
inline constexpr std::string_view kSingleLevel = "+";
inline constexpr std::string_view kMultiLevel = "#";

std::vector<std::string_view> split_levels(std::string_view path);

/// A literal topic: non-empty levels, no wildcards.
bool is_valid_topic(std::string_view topic);
void validate_topic(std::string_view topic);

/// Hierarchical subscription pattern. "+" matches exactly one level; a
/// trailing "#" matches one or more remaining levels.
class TopicFilter {
 public:
  static TopicFilter parse(std::string_view text);

  const std::vector<std::string> &levels() const { return levels_; }
  std::string str() const;
  bool has_wildcards() const;

  auto operator<=>(const TopicFilter &) const = default;

 private:
  std::vector<std::string> levels_;
};

bool match_topic(const TopicFilter &filter, std::string_view topic);

/// True when some literal topic matches both filters.
bool filters_intersect(const TopicFilter &a, const TopicFilter &b);

}  // namespace ledgerbus::contract
