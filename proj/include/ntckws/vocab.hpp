// ntckws/vocab.hpp
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

#ifndef NTCKWS_VOCAB_HPP_
#define NTCKWS_VOCAB_HPP_

#include <algorithm>
#include <fstream>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "ntckws/common.hpp"
#include "ntckws/symbol_table.hpp"

namespace ntckws {

inline constexpr const char* kBlankSymbol = "<blk>";
inline constexpr const char* kSelfLoopSymbol = "@";
inline constexpr const char* kBypassSymbol = "*";

// Token inventory: blank, real tokens (phonemes), and optionally the two
// wildcard tokens. Ids are dense FST labels (epsilon is 0, blank is 1);
// the wildcard ids, when present, are the last two.
class Vocabulary {
 public:
  static Vocabulary from_symbols(const std::vector<std::string>& real_tokens,
                                 bool wildcards) {
    auto table = std::make_shared<SymbolTable>();
    Vocabulary v;
    v.blank_ = table->add_symbol(kBlankSymbol);
    for (const auto& s : real_tokens) {
      if (s == kBlankSymbol || s == kSelfLoopSymbol || s == kBypassSymbol ||
          s == kEpsilonSymbol)
        throw ValidationError(strcat("reserved symbol used as a token: ", s));
      if (table->find(s) != -1)
        throw ValidationError(strcat("duplicate token symbol: ", s));
      table->add_symbol(s);
    }
    if (wildcards) {
      v.self_loop_ = table->add_symbol(kSelfLoopSymbol);
      v.bypass_ = table->add_symbol(kBypassSymbol);
    }
    v.table_ = std::move(table);
    v.validate();
    return v;
  }

  static Vocabulary from_table(SymbolTable table) {
    Vocabulary v;
    v.blank_ = table.find(kBlankSymbol);
    if (v.blank_ == -1)
      throw ValidationError(strcat("vocabulary table lacks '", kBlankSymbol, "'"));
    v.self_loop_ = table.find(kSelfLoopSymbol);
    v.bypass_ = table.find(kBypassSymbol);
    v.table_ = std::make_shared<SymbolTable>(std::move(table));
    v.validate();
    return v;
  }

  static Vocabulary load(const std::string& path) {
    return from_table(SymbolTable::load(path));
  }

  // The CMU monophone inventory: 24 consonants plus 15 vowels with three
  // stress variants each. This is the default phone set of the shipped
  // keyword harness.
  static Vocabulary cmu_monophones(bool wildcards = true) {
    static const char* kConsonants[] = {
        "B", "CH", "D", "DH", "F", "G", "HH", "JH", "K", "L", "M", "N",
        "NG", "P", "R", "S", "SH", "T", "TH", "V", "W", "Y", "Z", "ZH"};
    static const char* kVowels[] = {"AA", "AE", "AH", "AO", "AW", "AY", "EH",
                                    "ER", "EY", "IH", "IY", "OW", "OY", "UH",
                                    "UW"};
    std::vector<std::string> tokens;
    for (const char* c : kConsonants) tokens.push_back(c);
    for (const char* v : kVowels)
      for (const char* stress : {"0", "1", "2"})
        tokens.push_back(std::string(v) + stress);
    return from_symbols(tokens, wildcards);
  }

  const SymbolTable& table() const { return *table_; }
  SymbolTablePtr table_ptr() const { return table_; }

  int blank() const { return blank_; }
  bool has_wildcards() const { return self_loop_ != -1; }
  int self_loop() const { return self_loop_; }
  int bypass() const { return bypass_; }
  bool is_wildcard(int id) const { return id == self_loop_ || id == bypass_; }

  // Number of tokens excluding epsilon.
  int num_tokens() const { return table_->size() - 1; }

  std::vector<int> real_tokens() const {
    std::vector<int> out;
    for (int id = 1; id < table_->size(); ++id)
      if (id != blank_ && !is_wildcard(id)) out.push_back(id);
    return out;
  }

  // Token symbols in id order; this is the canonical posteriorgram column
  // order (blank first, wildcards last).
  std::vector<std::string> column_symbols(bool include_wildcards) const {
    std::vector<std::string> out;
    for (int id = 1; id < table_->size(); ++id) {
      if (!include_wildcards && is_wildcard(id)) continue;
      out.push_back(table_->name(id));
    }
    return out;
  }

  void validate() const {
    if (!table_ || table_->size() < 2)
      throw ValidationError("vocabulary needs at least a blank token");
    if (blank_ < 1 || is_wildcard(blank_))
      throw ValidationError("blank must be a regular non-wildcard token");
    if ((self_loop_ == -1) != (bypass_ == -1))
      throw ValidationError("wildcard tokens must both be present or both absent");
    if (self_loop_ != -1) {
      if (self_loop_ != table_->size() - 2 || bypass_ != table_->size() - 1)
        throw ValidationError("wildcard ids must be the last two token ids");
    }
  }

 private:
  SymbolTablePtr table_;
  int blank_ = -1;
  int self_loop_ = -1;
  int bypass_ = -1;
};

struct LexiconEntry {
  std::string word;
  std::vector<int> phonemes;
};

// Word -> phoneme-id mapping. The word symbol table reserves ids for the
// wildcard passthrough words when the vocabulary has wildcards, so grammar
// graphs can label wildcard arcs with symbols the lexicon FST understands.
class Lexicon {
 public:
  explicit Lexicon(Vocabulary vocab) : vocab_(std::move(vocab)) {
    auto words = std::make_shared<SymbolTable>();
    if (vocab_.has_wildcards()) {
      self_loop_word_ = words->add_symbol(kSelfLoopSymbol);
      bypass_word_ = words->add_symbol(kBypassSymbol);
    }
    words_ = words;
    mutable_words_ = words;
  }

  void add_entry(const std::string& word, const std::vector<std::string>& phones) {
    if (word == kSelfLoopSymbol || word == kBypassSymbol || word == kEpsilonSymbol)
      throw ValidationError(strcat("reserved word: ", word));
    if (phones.empty())
      throw ValidationError(strcat("empty pronunciation for word: ", word));
    LexiconEntry e;
    e.word = word;
    for (const auto& p : phones) {
      int id = vocab_.table().find(p);
      if (id < 1 || id == vocab_.blank() || vocab_.is_wildcard(id))
        throw ValidationError(
            strcat("unknown phoneme '", p, "' in pronunciation of '", word, "'"));
      e.phonemes.push_back(id);
    }
    mutable_words_->add_symbol(word);
    entries_.push_back(std::move(e));
  }

  // Text format: `word ph1 ph2 ...`, one entry per line.
  static Lexicon load(const std::string& path, const Vocabulary& vocab) {
    std::ifstream is(path);
    if (!is) throw IoError(strcat("cannot open lexicon: ", path));
    Lexicon lex(vocab);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      std::istringstream ls(line);
      std::string word;
      if (!(ls >> word)) continue;
      std::vector<std::string> phones;
      std::string p;
      while (ls >> p) phones.push_back(p);
      if (phones.empty())
        throw ValidationError(strcat("lexicon line ", lineno, " has no phonemes"));
      lex.add_entry(word, phones);
    }
    return lex;
  }

  void save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw IoError(strcat("cannot open for writing: ", path));
    for (const auto& e : entries_) {
      os << e.word;
      for (int p : e.phonemes) os << ' ' << vocab_.table().name(p);
      os << '\n';
    }
  }

  // One single-phoneme word per real token; the usual setup for keyword
  // grammars, where wildcard arcs sit between adjacent phonemes.
  static Lexicon phone_lexicon(const Vocabulary& vocab) {
    Lexicon lex(vocab);
    for (int id : vocab.real_tokens())
      lex.add_entry(vocab.table().name(id), {vocab.table().name(id)});
    return lex;
  }

  const std::vector<LexiconEntry>& entries() const { return entries_; }
  const Vocabulary& vocab() const { return vocab_; }
  SymbolTablePtr word_symbols() const { return words_; }

  int word_id(const std::string& word) const { return words_->find(word); }
  int self_loop_word() const { return self_loop_word_; }
  int bypass_word() const { return bypass_word_; }

  const LexiconEntry* find(const std::string& word) const {
    for (const auto& e : entries_)
      if (e.word == word) return &e;
    return nullptr;
  }

  // Phoneme ids of a word sequence, concatenated.
  std::vector<int> phonemes_of(const std::vector<std::string>& words) const {
    std::vector<int> out;
    for (const auto& w : words) {
      const LexiconEntry* e = find(w);
      if (!e) throw ValidationError(strcat("word not in lexicon: ", w));
      out.insert(out.end(), e->phonemes.begin(), e->phonemes.end());
    }
    return out;
  }

 private:
  Vocabulary vocab_;
  std::vector<LexiconEntry> entries_;
  SymbolTablePtr words_;
  std::shared_ptr<SymbolTable> mutable_words_;
  int self_loop_word_ = -1;
  int bypass_word_ = -1;
};

}  // namespace ntckws

#endif  // NTCKWS_VOCAB_HPP_
