// Copyright 2026 The VARED Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef VARED_COMMON_HPP_
#define VARED_COMMON_HPP_

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace vared {

// Error taxonomy shared by the library and the CLI. The CLI maps kinds to
// exit codes: Config -> 2, Io -> 3, Numeric -> 4. Shape errors are
// programming/contract errors and also exit 2 when they surface from configs.
enum class ErrorKind { Config, Io, Shape, Numeric };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

namespace detail {
inline void str_append(std::ostringstream&) {}
template <typename A, typename... Rest>
void str_append(std::ostringstream& os, const A& a, const Rest&... rest) {
  os << a;
  str_append(os, rest...);
}
}  // namespace detail

template <typename... Args>
std::string strcat_(const Args&... args) {
  std::ostringstream os;
  detail::str_append(os, args...);
  return os.str();
}

template <typename... Args>
[[noreturn]] void fail(ErrorKind kind, const Args&... args) {
  throw Error(kind, strcat_(args...));
}

template <typename... Args>
[[noreturn]] void fail_shape(const Args&... args) {
  fail(ErrorKind::Shape, args...);
}

inline void check(bool cond, ErrorKind kind, const std::string& msg) {
  if (!cond) throw Error(kind, msg);
}

}  // namespace vared

#endif  // VARED_COMMON_HPP_
