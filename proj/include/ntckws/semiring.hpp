// ntckws/semiring.hpp
//
// Copyright 2026 The ntckws Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef NTCKWS_SEMIRING_HPP_
#define NTCKWS_SEMIRING_HPP_

#include <cmath>
#include <limits>

namespace ntckws {

// All weights are natural-log values. Probabilities are never stored
// linearly inside graphs; at T > 100 frames linear path weights underflow.
using Weight = double;

inline constexpr Weight kLogZero = -std::numeric_limits<double>::infinity();
inline constexpr Weight kLogOne = 0.0;

// Log semiring plus: log(e^a + e^b). Exact when either side is zero
// (-inf), which matters for bit-comparable collapse of -inf wildcard arcs.
inline Weight log_add(Weight a, Weight b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

// Tropical semiring plus.
inline Weight trop_max(Weight a, Weight b) { return a > b ? a : b; }

// Shared times for both semirings. -inf annihilates.
inline Weight times(Weight a, Weight b) { return a + b; }

enum class Semiring { kLog, kTropical };

inline Weight plus(Semiring s, Weight a, Weight b) {
  return s == Semiring::kLog ? log_add(a, b) : trop_max(a, b);
}

}  // namespace ntckws

#endif  // NTCKWS_SEMIRING_HPP_
