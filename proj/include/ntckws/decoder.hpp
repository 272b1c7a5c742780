// ntckws/decoder.hpp
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

#ifndef NTCKWS_DECODER_HPP_
#define NTCKWS_DECODER_HPP_

#include <algorithm>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ntckws/graph.hpp"
#include "ntckws/lattice.hpp"
#include "ntckws/posteriorgram.hpp"

#include "json.hpp"

namespace ntckws {

struct DecoderConfig {
  // Maximum live hypotheses per frame after pruning.
  int max_active = 20;
  // Decode-time wildcard arc scores, added on top of the graph weight when
  // an arc completes a wildcard unit. Positive values encourage wildcard
  // paths, -inf disables them and collapses decoding to the plain graph.
  double lambda_self_loop = 4.0;
  double lambda_bypass = 2.0;
  // Candidate detections below this confidence are not emitted.
  double confidence_threshold = 0.0;
  // Candidates whose path consumed fewer real keyword units are discarded.
  int min_real_tokens = 1;
  // Drop in-flight partial keyword hypotheses once a detection fires.
  bool reset_on_detection = true;
  // Record per-frame alignments on hypotheses (for diagnostics/tests).
  bool keep_trace = false;

  void validate() const {
    if (max_active < 1) throw ValidationError("max_active must be >= 1");
    if (min_real_tokens < 1) throw ValidationError("min_real_tokens must be >= 1");
    if (confidence_threshold < 0.0 || confidence_threshold > 1.0)
      throw ValidationError("confidence_threshold must lie in [0,1]");
  }
};

struct Detection {
  std::string utt;
  std::string keyword;
  int start = 0;
  int end = 0;
  double confidence = 0.0;
  int real_tokens = 0;
  int wildcards = 0;
};

struct Hypothesis {
  int state = kNoState;
  double score = 0.0;
  int start_frame = -1;
  int real_tokens = 0;
  int wildcards = 0;
  // Best emission log-prob per completed keyword unit; bypassed units hold
  // their wildcard emission value.
  std::vector<double> unit_best;
  int last_token = kEpsilon;
  // Repeats of the last completed unit's token may still raise unit_best.
  bool unit_open = false;
  // Set after background absorption: the next keyword entry starts a fresh
  // detection window.
  bool window_reset_pending = true;
  // Last arc completed a keyword or bypass unit while reaching this state.
  bool just_completed = false;
  std::vector<int> trace;
};

// Geometric mean over keyword units of the best per-unit emission
// posterior. Bounded in [0,1], monotone in every per-unit posterior.
inline double confidence_score(const Hypothesis& h) {
  if (h.unit_best.empty())
    throw ValidationError("hypothesis has no keyword units; no confidence");
  double sum = 0.0;
  for (double lp : h.unit_best) sum += lp;
  return std::exp(sum / static_cast<double>(h.unit_best.size()));
}

// Keeps the max_active best hypotheses; ties broken by (state id,
// start_frame) so pruning is deterministic.
inline void prune(std::vector<Hypothesis>& active, int max_active) {
  if (static_cast<int>(active.size()) <= max_active) return;
  std::sort(active.begin(), active.end(), [](const Hypothesis& a, const Hypothesis& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.state != b.state) return a.state < b.state;
    return a.start_frame < b.start_frame;
  });
  active.resize(max_active);
}

struct SearchStats {
  int frames = 0;
  int max_active_seen = 0;
  int64_t extensions = 0;
};

struct BestPath {
  double score = kLogZero;
  std::vector<int> alignment;
};

// Frame-synchronous token passing over a compiled search space. One
// instance per stream; the search space is shared read-only. Feeding
// frames one at a time is the native mode, so batch decoding over a whole
// posteriorgram and streaming produce identical results by construction.
class Decoder {
 public:
  Decoder(const SearchSpace& space, const std::vector<std::string>& column_symbols,
          const DecoderConfig& cfg)
      : space_(&space), cfg_(cfg) {
    cfg_.validate();
    if (space.graph.start() == kNoState)
      throw ValidationError("search space has no start state");
    columns_ = static_cast<int>(column_symbols.size());
    // Map every graph label to its emission column up front.
    int max_label = 0;
    for (int s = 0; s < space.graph.num_states(); ++s)
      for (const Arc& a : space.graph.arcs(s)) max_label = std::max(max_label, a.ilabel);
    col_of_label_.assign(max_label + 1, -1);
    for (int s = 0; s < space.graph.num_states(); ++s) {
      for (const Arc& a : space.graph.arcs(s)) {
        if (a.ilabel == kEpsilon)
          throw ValidationError("search space contains epsilon arcs");
        if (col_of_label_[a.ilabel] != -1) continue;
        if (!space.graph.input_symbols)
          throw ValidationError("search space graph lacks a symbol table");
        const std::string& name = space.graph.input_symbols->name(a.ilabel);
        int col = -1;
        for (int j = 0; j < columns_; ++j)
          if (column_symbols[j] == name) {
            col = j;
            break;
          }
        if (col == -1)
          throw ValidationError(strcat("emissions lack a column for label '", name, "'"));
        col_of_label_[a.ilabel] = col;
      }
    }
    merge_slot_.assign(space.graph.num_states(), -1);
    merge_stamp_.assign(space.graph.num_states(), -1);
    reset("");
  }

  void reset(std::string utt) {
    utt_ = std::move(utt);
    frame_ = 0;
    detections_.clear();
    stats_ = SearchStats{};
    active_.clear();
    Hypothesis h;
    h.state = space_->graph.start();
    h.score = 0.0;
    active_.push_back(std::move(h));
  }

  // Consumes one frame of linear-domain probabilities (length = columns).
  void push_frame(const double* probs) {
    const int t = frame_;
    log_row_.resize(columns_);
    for (int j = 0; j < columns_; ++j) log_row_[j] = floored_log(probs[j]);
    struct Candidate {
      double score;
      int src;        // index into active_
      const Arc* arc;
      double lp;
    };
    std::vector<Candidate> winners;
    winners.reserve(active_.size() * 4);

    for (int i = 0; i < static_cast<int>(active_.size()); ++i) {
      const Hypothesis& h = active_[i];
      for (const Arc& a : space_->graph.arcs(h.state)) {
        double lp = log_row_[col_of_label_[a.ilabel]];
        double score = h.score + a.weight + lp;
        if (a.emitting) {
          if (a.kind == ArcKind::kSelfLoop) score += cfg_.lambda_self_loop;
          if (a.kind == ArcKind::kBypass) score += cfg_.lambda_bypass;
        }
        ++stats_.extensions;
        if (score == kLogZero || std::isnan(score)) continue;
        // Viterbi merge: best hypothesis per target state, strict better.
        int slot = merge_stamp_[a.next] == t ? merge_slot_[a.next] : -1;
        if (slot == -1) {
          merge_stamp_[a.next] = t;
          merge_slot_[a.next] = static_cast<int>(winners.size());
          winners.push_back({score, i, &a, lp});
        } else if (score > winners[slot].score) {
          winners[slot] = {score, i, &a, lp};
        }
      }
    }

    // Materialize merged winners, then prune.
    std::vector<Hypothesis> next;
    next.reserve(winners.size());
    for (const Candidate& c : winners) next.push_back(extend(active_[c.src], c, t));
    prune(next, cfg_.max_active);
    active_ = std::move(next);
    std::sort(active_.begin(), active_.end(),
              [](const Hypothesis& a, const Hypothesis& b) { return a.state < b.state; });
    stats_.max_active_seen =
        std::max(stats_.max_active_seen, static_cast<int>(active_.size()));

    emit_detections(t);
    ++frame_;
    stats_.frames = frame_;
  }

  const std::vector<Detection>& detections() const { return detections_; }
  const SearchStats& stats() const { return stats_; }
  const std::vector<Hypothesis>& active() const { return active_; }

  // Best complete path after the last pushed frame (score includes the
  // final weight). Empty when no hypothesis sits on a final state.
  std::optional<BestPath> best_complete_path() const {
    const Hypothesis* best = nullptr;
    double best_score = kLogZero;
    for (const Hypothesis& h : active_) {
      if (!space_->graph.is_final(h.state)) continue;
      double s = h.score + space_->graph.final_weight(h.state);
      if (s == kLogZero) continue;
      if (!best || s > best_score) {
        best = &h;
        best_score = s;
      }
    }
    if (!best) return std::nullopt;
    BestPath bp;
    bp.score = best_score;
    bp.alignment = best->trace;
    return bp;
  }

 private:
  template <typename Cand>
  Hypothesis extend(const Hypothesis& h, const Cand& c, int t) {
    Hypothesis g = h;
    const Arc& a = *c.arc;
    g.state = a.next;
    g.score = c.score;
    g.just_completed = false;
    if (cfg_.keep_trace) g.trace.push_back(a.ilabel);

    if (a.emitting) {
      switch (a.kind) {
        case ArcKind::kKeyword:
        case ArcKind::kNone:  // hand-built grammars without annotations
          begin_window_if_pending(g, t);
          if (g.start_frame < 0) g.start_frame = t;
          g.real_tokens += 1;
          g.unit_best.push_back(c.lp);
          g.unit_open = true;
          g.just_completed = true;
          break;
        case ArcKind::kBypass:
          begin_window_if_pending(g, t);
          if (g.start_frame < 0) g.start_frame = t;
          g.wildcards += 1;
          g.unit_best.push_back(c.lp);
          g.unit_open = true;
          g.just_completed = true;
          break;
        case ArcKind::kSelfLoop:
          g.wildcards += 1;
          g.unit_open = false;
          break;
        case ArcKind::kBackground:
          if (g.real_tokens > 0 || g.wildcards > 0) g.window_reset_pending = true;
          g.unit_open = false;
          break;
      }
      g.last_token = a.ilabel;
    } else if (g.unit_open && a.ilabel == g.last_token) {
      // Trailing repeat of the last completed unit's token.
      if (c.lp > g.unit_best.back()) g.unit_best.back() = c.lp;
    }
    return g;
  }

  static void begin_window_if_pending(Hypothesis& g, int t) {
    if (!g.window_reset_pending) return;
    g.window_reset_pending = false;
    g.start_frame = t;
    g.real_tokens = 0;
    g.wildcards = 0;
    g.unit_best.clear();
  }

  void emit_detections(int t) {
    bool emitted = false;
    for (const Hypothesis& h : active_) {
      if (!h.just_completed || !space_->graph.is_final(h.state)) continue;
      if (h.real_tokens < cfg_.min_real_tokens) continue;
      double conf = confidence_score(h);
      if (conf < cfg_.confidence_threshold) continue;
      Detection d;
      d.utt = utt_;
      d.keyword = space_->keyword;
      d.start = h.start_frame < 0 ? t : h.start_frame;
      d.end = t;
      d.confidence = conf;
      d.real_tokens = h.real_tokens;
      d.wildcards = h.wildcards;
      detections_.push_back(std::move(d));
      emitted = true;
    }
    if (emitted && cfg_.reset_on_detection) {
      std::vector<Hypothesis> kept;
      kept.reserve(active_.size());
      for (Hypothesis& h : active_) {
        bool mid_keyword = (h.real_tokens > 0 || h.wildcards > 0) &&
                           !h.window_reset_pending && !h.just_completed;
        if (!mid_keyword) kept.push_back(std::move(h));
      }
      active_ = std::move(kept);
    }
  }

  const SearchSpace* space_;
  DecoderConfig cfg_;
  int columns_ = 0;
  std::vector<int> col_of_label_;
  std::vector<int> merge_slot_;
  std::vector<int> merge_stamp_;

  std::string utt_;
  int frame_ = 0;
  std::vector<Hypothesis> active_;
  std::vector<Detection> detections_;
  std::vector<double> log_row_;
  SearchStats stats_;
};

struct DecodeResult {
  std::vector<Detection> detections;
  std::optional<BestPath> best;
  SearchStats stats;
};

// Whole-utterance convenience wrapper over the streaming decoder.
inline DecodeResult decode_utterance(const Posteriorgram& p, const SearchSpace& space,
                                     const DecoderConfig& cfg,
                                     const std::string& utt = "") {
  if (p.frames() < 1) throw ValidationError("empty posteriorgram");
  Decoder dec(space, p.symbols(), cfg);
  dec.reset(utt);
  for (int t = 0; t < p.frames(); ++t) dec.push_frame(p.row(t));
  DecodeResult res;
  res.detections = dec.detections();
  res.best = dec.best_complete_path();
  res.stats = dec.stats();
  return res;
}

// ---- detections JSONL ----

inline void write_detections_jsonl(const std::vector<Detection>& dets,
                                   std::ostream& os) {
  for (const Detection& d : dets) {
    nlohmann::ordered_json j;
    j["utt"] = d.utt;
    j["keyword"] = d.keyword;
    j["start"] = d.start;
    j["end"] = d.end;
    j["score"] = d.confidence;
    j["real_tokens"] = d.real_tokens;
    j["wildcards"] = d.wildcards;
    os << j.dump() << '\n';
  }
}

inline std::vector<Detection> read_detections_jsonl(std::istream& is) {
  std::vector<Detection> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw ValidationError(strcat("bad JSONL detection at line ", lineno));
    Detection d;
    d.utt = j.at("utt").get<std::string>();
    d.keyword = j.value("keyword", "");
    d.start = j.at("start").get<int>();
    d.end = j.at("end").get<int>();
    d.confidence = j.at("score").get<double>();
    d.real_tokens = j.value("real_tokens", 0);
    d.wildcards = j.value("wildcards", 0);
    out.push_back(std::move(d));
  }
  return out;
}

// Stable output order, independent of the worker count that produced them.
inline void sort_detections(std::vector<Detection>& dets) {
  std::sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
    if (a.utt != b.utt) return a.utt < b.utt;
    if (a.start != b.start) return a.start < b.start;
    if (a.end != b.end) return a.end < b.end;
    return a.confidence < b.confidence;
  });
}

}  // namespace ntckws

#endif  // NTCKWS_DECODER_HPP_
