// ntckws/simulate.hpp
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

#ifndef NTCKWS_SIMULATE_HPP_
#define NTCKWS_SIMULATE_HPP_

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "ntckws/posteriorgram.hpp"
#include "ntckws/vocab.hpp"

#include "json.hpp"

namespace ntckws {

// Frame-level corruption knobs. Severity levels stand in for acoustic
// noise conditions: heavier masking/substitution/insertion plays the role
// of a lower signal-to-noise ratio.
struct CorruptionConfig {
  std::string name = "clean";
  // Fraction of keyword-span frames replaced by noise rows.
  double mask_fraction = 0.0;
  // Expected inserted noise segments per utterance (Poisson).
  double insertion_rate = 0.0;
  // Per keyword token, probability its frames flip to another token.
  double substitution_rate = 0.0;
  // Peak mass the clean synthesizer puts on the active token.
  double sharpness = 0.9;
  uint64_t seed = 0;

  // How masked/inserted noise frames look. kUniform spreads mass evenly
  // over real tokens (a model that hedges on noise); kConfused puts
  // sharpness-level mass on one wrong token (a model that overfits noise
  // into confident wrong phonemes).
  enum class MaskProfile { kUniform, kConfused };
  MaskProfile profile = MaskProfile::kUniform;

  void validate() const {
    if (mask_fraction < 0.0 || mask_fraction > 1.0)
      throw ValidationError("mask_fraction must lie in [0,1]");
    if (substitution_rate < 0.0 || substitution_rate > 1.0)
      throw ValidationError("substitution_rate must lie in [0,1]");
    if (insertion_rate < 0.0) throw ValidationError("insertion_rate must be >= 0");
    if (sharpness <= 0.0 || sharpness > 1.0)
      throw ValidationError("sharpness must lie in (0,1]");
  }
};

namespace detail {

inline std::vector<std::string> synth_columns(const Vocabulary& vocab) {
  return vocab.column_symbols(/*include_wildcards=*/false);
}

// One row with `peak` mass on `col` and the remainder spread uniformly
// over the other columns.
inline void fill_peaked_row(Posteriorgram& p, int t, int col, double peak) {
  const int v = p.tokens();
  double rest = v > 1 ? (1.0 - peak) / (v - 1) : 0.0;
  for (int j = 0; j < v; ++j) p.set_prob(t, j, j == col ? peak : rest);
}

// Noise row per the corruption profile: mass only on real (non-blank)
// columns, summing to 1.
inline void fill_noise_row(Posteriorgram& p, int t, int blank_col,
                           CorruptionConfig::MaskProfile profile, double sharpness,
                           std::mt19937_64& rng) {
  const int v = p.tokens();
  const int reals = v - 1;
  if (profile == CorruptionConfig::MaskProfile::kUniform) {
    double u = 1.0 / reals;
    for (int j = 0; j < v; ++j) p.set_prob(t, j, j == blank_col ? 0.0 : u);
  } else {
    int pick = static_cast<int>(rng() % static_cast<uint64_t>(reals));
    int col = pick + (pick >= blank_col ? 1 : 0);
    double rest = reals > 1 ? (1.0 - sharpness) / (reals - 1) : 0.0;
    for (int j = 0; j < v; ++j)
      p.set_prob(t, j, j == blank_col ? 0.0 : (j == col ? sharpness : rest));
  }
}

}  // namespace detail

// Frame layout of a synthesized token sequence: token i occupies
// dwell frames starting at blank_dwell + i * (dwell + blank_dwell).
inline std::pair<int, int> synth_token_span(int token_index, int dwell,
                                            int blank_dwell = 1) {
  int begin = blank_dwell + token_index * (dwell + blank_dwell);
  return {begin, begin + dwell};
}

// Clean synthetic posteriorgram: every token holds `dwell` frames with
// `sharpness` mass on its column (jittered per frame, vanishing at
// sharpness 1 and at the uniform point), blank-dominant frames at token
// boundaries. Rows sum to 1.
inline Posteriorgram synth_clean(const std::vector<int>& tokens, int dwell,
                                 const Vocabulary& vocab, double sharpness,
                                 uint64_t seed, int blank_dwell = 1) {
  if (tokens.empty()) throw ValidationError("synth_clean: empty token sequence");
  if (dwell < 1) throw ValidationError("synth_clean: dwell must be >= 1");
  if (blank_dwell < 0) throw ValidationError("synth_clean: blank_dwell must be >= 0");

  std::vector<std::string> columns = detail::synth_columns(vocab);
  Posteriorgram p(static_cast<int>(tokens.size()) * (dwell + blank_dwell) + blank_dwell,
                  columns);
  const int blank_col = p.col_of(kBlankSymbol);
  const int v = p.tokens();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  // Jitter span shrinks to zero at sharpness 1 (one-hot rows) and at the
  // uniform point 1/V (flat rows), so those exact regimes stay exact.
  auto jittered = [&](double s) {
    double amp = (1.0 - s) * (s - 1.0 / v);
    double peak = s + amp * unit(rng);
    return std::clamp(peak, 1.0 / v, 1.0);
  };

  int t = 0;
  auto emit_blanks = [&] {
    for (int i = 0; i < blank_dwell; ++i, ++t)
      detail::fill_peaked_row(p, t, blank_col, jittered(sharpness));
  };
  emit_blanks();
  for (size_t k = 0; k < tokens.size(); ++k) {
    int col = p.col_of(vocab.table().name(tokens[k]));
    if (col == -1)
      throw ValidationError(strcat("token id ", tokens[k], " has no emission column"));
    for (int i = 0; i < dwell; ++i, ++t)
      detail::fill_peaked_row(p, t, col, jittered(sharpness));
    emit_blanks();
  }
  return p;
}

struct CorruptResult {
  Posteriorgram gram;
  // Keyword span after insertions shifted/stretched it.
  int span_begin = -1;
  int span_end = -1;
};

// Applies the three error families to the keyword span [span_begin,
// span_end): substitution flips whole argmax runs to another token's
// profile, masking replaces individual frames with noise rows, insertion
// splices noise segments between frames (growing the matrix). All draws
// come from cfg.seed, so equal configs give bit-identical outputs.
inline CorruptResult corrupt(const Posteriorgram& p, int span_begin, int span_end,
                             const CorruptionConfig& cfg) {
  cfg.validate();
  if (span_begin < 0 || span_end > p.frames() || span_begin > span_end)
    throw ValidationError(strcat("corrupt: span [", span_begin, ",", span_end,
                                 ") outside 0..", p.frames()));
  std::mt19937_64 rng(cfg.seed);
  const int blank_col = p.col_of(kBlankSymbol);
  if (blank_col == -1) throw ValidationError("corrupt: no blank column");

  Posteriorgram out = p;

  // Substitution: argmax runs of real tokens inside the span.
  if (cfg.substitution_rate > 0.0) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    int t = span_begin;
    while (t < span_end) {
      int run_col = -1;
      double best = -1.0;
      for (int j = 0; j < out.tokens(); ++j)
        if (out.prob(t, j) > best) {
          best = out.prob(t, j);
          run_col = j;
        }
      int run_end = t + 1;
      while (run_end < span_end) {
        double b2 = -1.0;
        int c2 = -1;
        for (int j = 0; j < out.tokens(); ++j)
          if (out.prob(run_end, j) > b2) {
            b2 = out.prob(run_end, j);
            c2 = j;
          }
        if (c2 != run_col) break;
        ++run_end;
      }
      if (run_col != blank_col && out.tokens() > 2 &&
          coin(rng) < cfg.substitution_rate) {
        // Uniform over real tokens other than the one being replaced.
        int other = run_col;
        while (other == run_col || other == blank_col)
          other = static_cast<int>(rng() % static_cast<uint64_t>(out.tokens()));
        for (int f = t; f < run_end; ++f) {
          double peak = out.prob(f, run_col);
          double swapped = out.prob(f, other);
          out.set_prob(f, other, peak);
          out.set_prob(f, run_col, swapped);
        }
      }
      t = run_end;
    }
  }

  // Masking: a fixed fraction of span frames become noise rows.
  int span_len = span_end - span_begin;
  if (cfg.mask_fraction > 0.0 && span_len > 0) {
    int n_mask = static_cast<int>(std::lround(cfg.mask_fraction * span_len));
    std::vector<int> frames(span_len);
    for (int i = 0; i < span_len; ++i) frames[i] = span_begin + i;
    for (int i = 0; i < n_mask && i < span_len; ++i) {
      std::uniform_int_distribution<int> pick(i, span_len - 1);
      std::swap(frames[i], frames[pick(rng)]);
      detail::fill_noise_row(out, frames[i], blank_col, cfg.profile, cfg.sharpness,
                             rng);
    }
  }

  // Insertion: noise segments spliced inside the span.
  CorruptResult res{std::move(out), span_begin, span_end};
  if (cfg.insertion_rate > 0.0 && span_len >= 2) {
    std::poisson_distribution<int> count(cfg.insertion_rate);
    int n_segments = count(rng);
    for (int k = 0; k < n_segments; ++k) {
      std::uniform_int_distribution<int> len_dist(1, 4);
      int len = len_dist(rng);
      std::uniform_int_distribution<int> pos_dist(res.span_begin + 1,
                                                  std::max(res.span_begin + 1,
                                                           res.span_end - 1));
      int pos = pos_dist(rng);
      Posteriorgram grown(res.gram.frames() + len, res.gram.symbols());
      for (int t = 0; t < pos; ++t)
        for (int j = 0; j < grown.tokens(); ++j)
          grown.set_prob(t, j, res.gram.prob(t, j));
      for (int t = 0; t < len; ++t)
        detail::fill_noise_row(grown, pos + t, blank_col, cfg.profile, cfg.sharpness,
                               rng);
      for (int t = pos; t < res.gram.frames(); ++t)
        for (int j = 0; j < grown.tokens(); ++j)
          grown.set_prob(t + len, j, res.gram.prob(t, j));
      res.gram = std::move(grown);
      res.span_end += len;
    }
  }
  return res;
}

// ---- dataset synthesis ----

struct ManifestEntry {
  std::string utt;
  std::string file;
  int label = 0;  // 1 positive, 0 negative
  std::string level;
  int span_begin = -1;  // keyword frame span; -1/-1 for negatives
  int span_end = -1;
};

inline void write_manifest_jsonl(const std::vector<ManifestEntry>& entries,
                                 std::ostream& os) {
  for (const auto& e : entries) {
    nlohmann::ordered_json j;
    j["utt"] = e.utt;
    j["file"] = e.file;
    j["label"] = e.label;
    j["level"] = e.level;
    if (e.span_begin >= 0)
      j["span"] = std::vector<int>{e.span_begin, e.span_end};
    else
      j["span"] = nullptr;
    os << j.dump() << '\n';
  }
}

inline std::vector<ManifestEntry> read_manifest_jsonl(std::istream& is) {
  std::vector<ManifestEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw ValidationError(strcat("bad JSONL manifest at line ", lineno));
    ManifestEntry e;
    e.utt = j.at("utt").get<std::string>();
    e.file = j.value("file", "");
    e.label = j.at("label").get<int>();
    e.level = j.value("level", "");
    if (j.contains("span") && !j["span"].is_null()) {
      e.span_begin = j["span"][0].get<int>();
      e.span_end = j["span"][1].get<int>();
    }
    out.push_back(std::move(e));
  }
  return out;
}

struct DatasetParams {
  std::vector<int> keyword_tokens;  // phoneme ids of the keyword
  int n_pos = 100;                  // positives per level
  int n_neg = 100;
  int neg_frames = 200;  // approximate negative utterance length
  int dwell = 3;
  int context_tokens = 3;  // random real tokens before and after the keyword
  double sharpness = 0.9;
  CorruptionConfig::MaskProfile profile = CorruptionConfig::MaskProfile::kUniform;

  void validate() const {
    if (keyword_tokens.empty()) throw ValidationError("dataset needs a keyword");
    if (n_pos < 1 || n_neg < 1) throw ValidationError("dataset counts must be >= 1");
    if (neg_frames < 1) throw ValidationError("neg_frames must be >= 1");
    if (dwell < 1) throw ValidationError("dwell must be >= 1");
  }
};

namespace detail {

inline bool contains_subsequence(const std::vector<int>& hay,
                                 const std::vector<int>& needle) {
  if (needle.empty() || hay.size() < needle.size()) return false;
  for (size_t i = 0; i + needle.size() <= hay.size(); ++i) {
    bool hit = true;
    for (size_t j = 0; j < needle.size(); ++j)
      if (hay[i + j] != needle[j]) {
        hit = false;
        break;
      }
    if (hit) return true;
  }
  return false;
}

inline std::vector<int> random_tokens(int count, const std::vector<int>& pool,
                                      std::mt19937_64& rng) {
  std::vector<int> out(count);
  for (int i = 0; i < count; ++i)
    out[i] = pool[rng() % static_cast<uint64_t>(pool.size())];
  return out;
}

}  // namespace detail

// Synthesizes one positive utterance: random context tokens, keyword,
// random context tokens, then level corruption over the keyword span.
inline CorruptResult synth_positive(const Vocabulary& vocab, const DatasetParams& params,
                                    const CorruptionConfig& level, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<int> pool = vocab.real_tokens();
  std::vector<int> pre = detail::random_tokens(params.context_tokens, pool, rng);
  std::vector<int> post = detail::random_tokens(params.context_tokens, pool, rng);
  std::vector<int> tokens = pre;
  tokens.insert(tokens.end(), params.keyword_tokens.begin(),
                params.keyword_tokens.end());
  tokens.insert(tokens.end(), post.begin(), post.end());

  Posteriorgram clean = synth_clean(tokens, params.dwell, vocab, params.sharpness,
                                    split_seed(seed, 1));
  int kb = synth_token_span(params.context_tokens, params.dwell).first;
  int ke = synth_token_span(params.context_tokens +
                                static_cast<int>(params.keyword_tokens.size()) - 1,
                            params.dwell)
               .second;
  CorruptionConfig cfg = level;
  cfg.seed = split_seed(seed, 2);
  cfg.sharpness = params.sharpness;
  cfg.profile = params.profile;
  return corrupt(clean, kb, ke, cfg);
}

// Synthesizes one negative utterance: a random token string guaranteed not
// to contain the keyword phoneme sequence contiguously, lightly corrupted
// over its whole extent with the given level so negatives share the
// positives' acoustic conditions.
inline Posteriorgram synth_negative(const Vocabulary& vocab, const DatasetParams& params,
                                    const CorruptionConfig& level, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<int> pool = vocab.real_tokens();
  int n_tokens = std::max(1, params.neg_frames / (params.dwell + 1));
  std::vector<int> tokens;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    tokens = detail::random_tokens(n_tokens, pool, rng);
    if (!detail::contains_subsequence(tokens, params.keyword_tokens)) break;
    tokens.clear();
  }
  if (tokens.empty())
    throw ValidationError("could not sample a keyword-free negative string");
  Posteriorgram clean = synth_clean(tokens, params.dwell, vocab, params.sharpness,
                                    split_seed(seed, 1));
  CorruptionConfig cfg = level;
  cfg.seed = split_seed(seed, 2);
  cfg.sharpness = params.sharpness;
  cfg.profile = params.profile;
  cfg.insertion_rate = 0.0;  // negatives keep their nominal duration
  return corrupt(clean, 0, clean.frames(), cfg).gram;
}

// Writes posteriorgram files plus a JSONL manifest. Per level, n_pos
// positives; negatives are shared across levels and cycle through the
// level configs so the negative pool covers all conditions. Utterances are
// generated from per-index derived seeds, so the output is identical for
// any worker count.
inline std::vector<ManifestEntry> make_dataset(const Vocabulary& vocab,
                                               const DatasetParams& params,
                                               const std::vector<CorruptionConfig>& levels,
                                               const std::string& out_dir,
                                               uint64_t seed, int jobs = 1) {
  params.validate();
  if (levels.empty()) throw ValidationError("make_dataset: no corruption levels");
  for (const auto& l : levels) l.validate();
  std::filesystem::create_directories(out_dir);

  struct Task {
    int level = 0;
    int i = 0;
    bool positive = true;
  };
  std::vector<Task> tasks;
  for (int l = 0; l < static_cast<int>(levels.size()); ++l)
    for (int i = 0; i < params.n_pos; ++i) tasks.push_back({l, i, true});
  for (int i = 0; i < params.n_neg; ++i)
    tasks.push_back({i % static_cast<int>(levels.size()), i, false});

  std::vector<ManifestEntry> manifest(tasks.size());
  auto run_task = [&](size_t index) {
    const Task& task = tasks[index];
    const CorruptionConfig& level = levels[task.level];
    ManifestEntry e;
    if (task.positive) {
      CorruptResult r =
          synth_positive(vocab, params, level, split_seed(seed, index));
      e.utt = strcat("pos_", level.name, "_", task.i);
      e.file = strcat(e.utt, ".post");
      e.label = 1;
      e.level = level.name;
      e.span_begin = r.span_begin;
      e.span_end = r.span_end;
      r.gram.save(out_dir + "/" + e.file);
    } else {
      Posteriorgram g =
          synth_negative(vocab, params, level, split_seed(seed, index));
      e.utt = strcat("neg_", task.i);
      e.file = strcat(e.utt, ".post");
      e.label = 0;
      e.level = "negative";
      g.save(out_dir + "/" + e.file);
    }
    manifest[index] = std::move(e);
  };

  parallel_for(tasks.size(), jobs, run_task);

  std::ofstream os(out_dir + "/manifest.jsonl");
  if (!os) throw IoError(strcat("cannot write manifest in ", out_dir));
  write_manifest_jsonl(manifest, os);
  return manifest;
}

// The default severity ladder: named after the acoustic conditions they
// stand in for, most corrupted first.
inline std::vector<CorruptionConfig> default_levels() {
  struct Row {
    const char* name;
    double mask, sub, ins;
  };
  static const Row rows[] = {
      {"snr-5", 0.50, 0.50, 2.0}, {"snr0", 0.35, 0.35, 1.5},
      {"snr5", 0.25, 0.25, 1.0},  {"snr10", 0.15, 0.15, 0.6},
      {"snr15", 0.08, 0.08, 0.3}, {"snr20", 0.04, 0.04, 0.15},
  };
  std::vector<CorruptionConfig> out;
  for (const Row& r : rows) {
    CorruptionConfig c;
    c.name = r.name;
    c.mask_fraction = r.mask;
    c.substitution_rate = r.sub;
    c.insertion_rate = r.ins;
    out.push_back(c);
  }
  return out;
}

}  // namespace ntckws

#endif  // NTCKWS_SIMULATE_HPP_
