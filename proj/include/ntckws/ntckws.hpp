// ntckws/ntckws.hpp
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

#ifndef NTCKWS_NTCKWS_HPP_
#define NTCKWS_NTCKWS_HPP_

#include "ntckws/common.hpp"
#include "ntckws/compose.hpp"
#include "ntckws/decoder.hpp"
#include "ntckws/eval.hpp"
#include "ntckws/fst.hpp"
#include "ntckws/graph.hpp"
#include "ntckws/lattice.hpp"
#include "ntckws/loss.hpp"
#include "ntckws/posteriorgram.hpp"
#include "ntckws/semiring.hpp"
#include "ntckws/simulate.hpp"
#include "ntckws/symbol_table.hpp"
#include "ntckws/vocab.hpp"

#endif  // NTCKWS_NTCKWS_HPP_
