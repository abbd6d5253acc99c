/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "ledgerbus/topic.hpp"

namespace ledgerbus::contract {

std::vector<std::string_view> split_levels(std::string_view path) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = path.find(kLevelSeparator, start);
    if (pos == std::string_view::npos) {
      out.push_back(path.substr(start));
      return out;
    }
    out.push_back(path.substr(start, pos - start));
    start = pos + 1;
  }
}

bool is_valid_topic(std::string_view topic) {
  if (topic.empty()) return false;
  for (auto level : split_levels(topic)) {
    if (level.empty()) return false;
    if (level.find_first_of("+#") != std::string_view::npos) return false;
  }
  return true;
}

void validate_topic(std::string_view topic) {
  if (!is_valid_topic(topic)) {
    throw FilterError("invalid topic '" + std::string(topic) + "'");
  }
}

TopicFilter TopicFilter::parse(std::string_view text) {
  if (text.empty()) throw FilterError("empty topic filter");
  TopicFilter f;
  auto levels = split_levels(text);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    auto level = levels[i];
    if (level.empty()) throw FilterError("empty level in filter '" + std::string(text) + "'");
    if (level == kMultiLevel) {
      if (i + 1 != levels.size()) {
        throw FilterError("'#' must be the last level in '" + std::string(text) + "'");
      }
    } else if (level != kSingleLevel && level.find_first_of("+#") != std::string_view::npos) {
      throw FilterError("wildcard must occupy a whole level in '" + std::string(text) + "'");
    }
    f.levels_.emplace_back(level);
  }
  return f;
}

std::string TopicFilter::str() const {
  std::string out;
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    if (i) out.push_back(kLevelSeparator);
    out += levels_[i];
  }
  return out;
}

bool TopicFilter::has_wildcards() const {
  for (const auto &l : levels_) {
    if (l == kSingleLevel || l == kMultiLevel) return true;
  }
  return false;
}

bool match_topic(const TopicFilter &filter, std::string_view topic) {
  const auto &fl = filter.levels();
  auto tl = split_levels(topic);
  for (std::size_t i = 0; i < fl.size(); ++i) {
    if (fl[i] == kMultiLevel) return tl.size() > i;
    if (i >= tl.size()) return false;
    if (fl[i] != kSingleLevel && fl[i] != tl[i]) return false;
  }
  return fl.size() == tl.size();
}

bool filters_intersect(const TopicFilter &a, const TopicFilter &b) {
  const auto &al = a.levels();
  const auto &bl = b.levels();
  for (std::size_t i = 0;; ++i) {
    const bool a_done = i == al.size();
    const bool b_done = i == bl.size();
    if (a_done || b_done) return a_done && b_done;
    const bool a_multi = al[i] == kMultiLevel;
    const bool b_multi = bl[i] == kMultiLevel;
    // "#" at level i accepts any continuation of one or more levels, and the
    // other filter still has at least one level here, so both can be met.
    if (a_multi || b_multi) return true;
    if (al[i] != kSingleLevel && bl[i] != kSingleLevel && al[i] != bl[i]) return false;
  }
}

}  // namespace ledgerbus::contract
