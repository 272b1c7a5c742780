// ntckws/symbol_table.hpp
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

#ifndef NTCKWS_SYMBOL_TABLE_HPP_
#define NTCKWS_SYMBOL_TABLE_HPP_

#include <fstream>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "ntckws/common.hpp"

namespace ntckws {

inline constexpr int kEpsilon = 0;
inline constexpr const char* kEpsilonSymbol = "<eps>";

// Dense string<->id map. Id 0 is always epsilon. Serialized as
// `symbol id` lines, one per entry.
class SymbolTable {
 public:
  SymbolTable() { add_symbol(kEpsilonSymbol); }

  int add_symbol(const std::string& sym) {
    auto it = sym_to_id_.find(sym);
    if (it != sym_to_id_.end()) return it->second;
    int id = static_cast<int>(id_to_sym_.size());
    id_to_sym_.push_back(sym);
    sym_to_id_.emplace(sym, id);
    return id;
  }

  // -1 when absent.
  int find(const std::string& sym) const {
    auto it = sym_to_id_.find(sym);
    return it == sym_to_id_.end() ? -1 : it->second;
  }

  bool contains(int id) const {
    return id >= 0 && id < static_cast<int>(id_to_sym_.size());
  }

  const std::string& name(int id) const {
    if (!contains(id)) throw ValidationError(strcat("symbol id out of range: ", id));
    return id_to_sym_[id];
  }

  int size() const { return static_cast<int>(id_to_sym_.size()); }

  void save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw IoError(strcat("cannot open for writing: ", path));
    for (int i = 0; i < size(); ++i) os << id_to_sym_[i] << ' ' << i << '\n';
  }

  static SymbolTable load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError(strcat("cannot open symbol table: ", path));
    SymbolTable table;
    table.id_to_sym_.clear();
    table.sym_to_id_.clear();
    std::string sym;
    long id;
    while (is >> sym >> id) {
      if (id != static_cast<long>(table.id_to_sym_.size()))
        throw ValidationError(
            strcat("symbol table ids must be dense and ascending, got ", id,
                   " for '", sym, "' in ", path));
      table.id_to_sym_.push_back(sym);
      table.sym_to_id_.emplace(sym, static_cast<int>(id));
    }
    if (table.id_to_sym_.empty() || table.id_to_sym_[0] != kEpsilonSymbol)
      throw ValidationError(strcat("symbol table must start with '", kEpsilonSymbol,
                                   " 0': ", path));
    return table;
  }

 private:
  std::vector<std::string> id_to_sym_;
  std::unordered_map<std::string, int> sym_to_id_;
};

using SymbolTablePtr = std::shared_ptr<const SymbolTable>;

}  // namespace ntckws

#endif  // NTCKWS_SYMBOL_TABLE_HPP_
