// Copyright 2026 The Derender Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace derender {

#if defined(DERENDER_REAL_FLOAT)
using real = float;
#else
using real = double;
#endif

struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void msg_append(std::ostringstream&) {}

template <typename T, typename... Rest>
void msg_append(std::ostringstream& os, const T& v, const Rest&... rest) {
  os << v;
  msg_append(os, rest...);
}

}  // namespace detail

template <typename... Args>
std::string msg(const Args&... args) {
  std::ostringstream os;
  detail::msg_append(os, args...);
  return os.str();
}

template <typename... Args>
[[noreturn]] void fail(const Args&... args) {
  throw error(msg(args...));
}

template <typename... Args>
void require(bool cond, const Args&... args) {
  if (!cond) fail(args...);
}

inline constexpr const char* version_string = "0.1.0";

}  // namespace derender
