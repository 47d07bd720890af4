// Copyright (c) the gustrom project contributors.
// SPDX-License-Identifier: Apache-2.0

#ifndef GUSTROM_FORMAT_HPP
#define GUSTROM_FORMAT_HPP

#include <charconv>
#include <string>

namespace gustrom {

// Shortest decimal form that parses back to the same double.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

} // namespace gustrom

#endif // GUSTROM_FORMAT_HPP
