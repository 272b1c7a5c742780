// ntckws/posteriorgram.hpp
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

#ifndef NTCKWS_POSTERIORGRAM_HPP_
#define NTCKWS_POSTERIORGRAM_HPP_

#include <cmath>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "ntckws/common.hpp"
#include "ntckws/semiring.hpp"
#include "ntckws/vocab.hpp"

namespace ntckws {

// Zero probabilities are floored here when converted to the log domain, so
// graphs never grow -inf emission arcs out of an exact zero.
inline constexpr double kProbFloor = 1e-10;

inline double floored_log(double p) {
  return std::log(p < kProbFloor ? kProbFloor : p);
}

// T x V matrix of per-frame token probabilities. Stored linear; converted
// to natural log on demand. Rows of a model posteriorgram sum to 1; after
// wildcard augmentation they deliberately do not (the wildcard mass is
// synthetic), so validation skips wildcard columns.
class Posteriorgram {
 public:
  Posteriorgram(int frames, std::vector<std::string> symbols)
      : frames_(frames),
        symbols_(std::move(symbols)),
        data_(static_cast<size_t>(frames) * symbols_.size(), 0.0) {
    if (frames_ < 1) throw ValidationError("posteriorgram needs at least 1 frame");
    if (symbols_.empty()) throw ValidationError("posteriorgram needs columns");
  }

  int frames() const { return frames_; }
  int tokens() const { return static_cast<int>(symbols_.size()); }
  const std::vector<std::string>& symbols() const { return symbols_; }

  double prob(int t, int col) const { return data_[index(t, col)]; }
  void set_prob(int t, int col, double v) { data_[index(t, col)] = v; }
  double log_prob(int t, int col) const { return floored_log(prob(t, col)); }

  const double* row(int t) const { return data_.data() + index(t, 0); }
  double* mutable_row(int t) { return data_.data() + index(t, 0); }

  int col_of(const std::string& sym) const {
    for (int j = 0; j < tokens(); ++j)
      if (symbols_[j] == sym) return j;
    return -1;
  }

  bool has_wildcards() const {
    return col_of(kSelfLoopSymbol) != -1 || col_of(kBypassSymbol) != -1;
  }

  // Row-sum and range check. Wildcard columns are excluded from the sum.
  void validate(double tol = 1e-4) const {
    int wc_a = col_of(kSelfLoopSymbol), wc_b = col_of(kBypassSymbol);
    for (int t = 0; t < frames_; ++t) {
      double sum = 0.0;
      for (int j = 0; j < tokens(); ++j) {
        double p = prob(t, j);
        if (p < 0.0 || p > 1.0 || !std::isfinite(p))
          throw ValidationError(
              strcat("probability out of [0,1] at frame ", t, " column ", j));
        if (j != wc_a && j != wc_b) sum += p;
      }
      if (std::abs(sum - 1.0) > tol)
        throw ValidationError(strcat("row ", t, " sums to ", sum, ", expected 1"));
    }
  }

  // ---- binary format ----
  // magic 'POST', version u32=1, T u32, V u32 (little endian), T*V float32
  // probabilities row-major, then the column symbol table as u32 count and
  // length-prefixed UTF-8 entries.

  void save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError(strcat("cannot open for writing: ", path));
    write_binary(os, "POST");
  }

  static Posteriorgram load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError(strcat("cannot open posteriorgram: ", path));
    Posteriorgram p = read_binary(is, "POST", path);
    p.validate();
    return p;
  }

  // Reads just the frame count; used to total negative audio duration
  // without loading matrices.
  static int peek_frames(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError(strcat("cannot open posteriorgram: ", path));
    char magic[4];
    uint32_t version = 0, t = 0;
    is.read(magic, 4);
    is.read(reinterpret_cast<char*>(&version), 4);
    is.read(reinterpret_cast<char*>(&t), 4);
    if (!is || std::memcmp(magic, "POST", 4) != 0)
      throw IoError(strcat("bad posteriorgram header: ", path));
    return static_cast<int>(t);
  }

  // ---- CSV (header = symbols); for hand-written fixtures ----

  void to_csv(std::ostream& os) const {
    for (int j = 0; j < tokens(); ++j) os << (j ? "," : "") << symbols_[j];
    os << '\n';
    os.precision(17);
    for (int t = 0; t < frames_; ++t) {
      for (int j = 0; j < tokens(); ++j) os << (j ? "," : "") << prob(t, j);
      os << '\n';
    }
  }

  static Posteriorgram from_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw IoError("empty CSV posteriorgram");
    std::vector<std::string> symbols = split_csv(line);
    std::vector<double> values;
    int rows = 0;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      auto fields = split_csv(line);
      if (fields.size() != symbols.size())
        throw ValidationError(strcat("CSV row ", rows + 1, " has ", fields.size(),
                                     " fields, expected ", symbols.size()));
      for (const auto& f : fields) values.push_back(std::stod(f));
      ++rows;
    }
    if (rows == 0) throw ValidationError("CSV posteriorgram has no rows");
    Posteriorgram p(rows, symbols);
    p.data_ = std::move(values);
    p.validate();
    return p;
  }

  // Generic raw-matrix container sharing the same layout with magic 'GRAD';
  // no row-sum validation applies.
  void save_matrix(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError(strcat("cannot open for writing: ", path));
    write_binary(os, "GRAD");
  }

  static Posteriorgram load_matrix(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError(strcat("cannot open matrix: ", path));
    return read_binary(is, "GRAD", path);
  }

 private:
  size_t index(int t, int col) const {
    if (t < 0 || t >= frames_ || col < 0 || col >= tokens())
      throw ValidationError(strcat("posteriorgram index out of range: frame ", t,
                                   " column ", col));
    return static_cast<size_t>(t) * tokens() + col;
  }

  static std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) out.push_back(field);
    return out;
  }

  void write_binary(std::ostream& os, const char* magic) const {
    os.write(magic, 4);
    auto write_u32 = [&os](uint32_t v) {
      unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                            static_cast<unsigned char>((v >> 8) & 0xff),
                            static_cast<unsigned char>((v >> 16) & 0xff),
                            static_cast<unsigned char>((v >> 24) & 0xff)};
      os.write(reinterpret_cast<const char*>(b), 4);
    };
    write_u32(1);
    write_u32(static_cast<uint32_t>(frames_));
    write_u32(static_cast<uint32_t>(tokens()));
    for (double v : data_) {
      float f = static_cast<float>(v);
      os.write(reinterpret_cast<const char*>(&f), 4);
    }
    write_u32(static_cast<uint32_t>(symbols_.size()));
    for (const auto& s : symbols_) {
      write_u32(static_cast<uint32_t>(s.size()));
      os.write(s.data(), static_cast<std::streamsize>(s.size()));
    }
  }

  static Posteriorgram read_binary(std::istream& is, const char* magic,
                                   const std::string& path) {
    char got[4];
    is.read(got, 4);
    if (!is || std::memcmp(got, magic, 4) != 0)
      throw IoError(strcat("bad magic in ", path, " (expected ", magic, ")"));
    auto read_u32 = [&is, &path]() {
      unsigned char b[4];
      is.read(reinterpret_cast<char*>(b), 4);
      if (!is) throw IoError(strcat("truncated header in ", path));
      return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
             (static_cast<uint32_t>(b[2]) << 16) |
             (static_cast<uint32_t>(b[3]) << 24);
    };
    uint32_t version = read_u32();
    if (version != 1)
      throw IoError(strcat("unsupported posteriorgram version ", version, " in ", path));
    uint32_t frames = read_u32();
    uint32_t tokens = read_u32();
    if (frames < 1 || tokens < 1 || frames > (1u << 28) || tokens > (1u << 20))
      throw IoError(strcat("implausible shape ", frames, "x", tokens, " in ", path));
    size_t count = static_cast<size_t>(frames) * tokens;
    std::vector<float> raw(count);
    is.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(count * 4));
    if (!is)
      throw IoError(strcat("truncated data in ", path, ": expected ", count * 4,
                           " payload bytes"));
    uint32_t nsyms = read_u32();
    if (nsyms != tokens)
      throw IoError(strcat("symbol count ", nsyms, " does not match ", tokens,
                           " columns in ", path));
    std::vector<std::string> symbols(nsyms);
    for (auto& s : symbols) {
      uint32_t len = read_u32();
      if (len > (1u << 16)) throw IoError(strcat("implausible symbol length in ", path));
      s.resize(len);
      is.read(s.data(), len);
      if (!is) throw IoError(strcat("truncated symbol table in ", path));
    }
    Posteriorgram p(static_cast<int>(frames), std::move(symbols));
    for (size_t i = 0; i < count; ++i) p.data_[i] = raw[i];
    return p;
  }

  int frames_ = 0;
  std::vector<std::string> symbols_;
  std::vector<double> data_;
};

// Appends the two wildcard columns defined as the arithmetic mean of the
// real (non-blank, non-wildcard) token posteriors at each frame. The '@'
// and '*' columns are identical by definition, and the original columns
// are untouched. Rows of the result no longer sum to 1.
inline Posteriorgram augment_wildcards(const Posteriorgram& p, const Vocabulary& vocab) {
  if (!vocab.has_wildcards())
    throw ValidationError("vocabulary has no wildcard tokens");
  if (p.has_wildcards())
    throw ValidationError("posteriorgram already has wildcard columns");
  if (p.col_of(kBlankSymbol) == -1)
    throw ValidationError("posteriorgram lacks a blank column");

  std::vector<int> real_cols;
  for (int id : vocab.real_tokens()) {
    const std::string& name = vocab.table().name(id);
    int col = p.col_of(name);
    if (col == -1)
      throw ValidationError(strcat("posteriorgram lacks column for token '", name, "'"));
    real_cols.push_back(col);
  }

  std::vector<std::string> symbols = p.symbols();
  symbols.push_back(kSelfLoopSymbol);
  symbols.push_back(kBypassSymbol);
  Posteriorgram out(p.frames(), symbols);
  int wc_a = out.tokens() - 2, wc_b = out.tokens() - 1;
  for (int t = 0; t < p.frames(); ++t) {
    for (int j = 0; j < p.tokens(); ++j) out.set_prob(t, j, p.prob(t, j));
    double sum = 0.0;
    for (int c : real_cols) sum += p.prob(t, c);
    double mean = sum / static_cast<double>(real_cols.size());
    out.set_prob(t, wc_a, mean);
    out.set_prob(t, wc_b, mean);
  }
  return out;
}

}  // namespace ntckws

#endif  // NTCKWS_POSTERIORGRAM_HPP_
