// ntckws/cli.hpp
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

#ifndef NTCKWS_CLI_HPP_
#define NTCKWS_CLI_HPP_

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ntckws/ntckws.hpp"

#include "CLI11.hpp"
#include "json.hpp"

namespace ntckws {
namespace cli {

// Exit codes: 0 success, 2 usage, 3 I/O, 4 validation, 5 internal.
enum ExitCode {
  kOk = 0,
  kUsageError = 2,
  kIoErrorCode = 3,
  kValidationErrorCode = 4,
  kInternalError = 5,
};

namespace detail {

inline std::vector<std::string> split_words(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

inline std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

// Accepts plain numbers plus inf/-inf spellings, so wildcard weights can be
// disabled from the command line.
inline double parse_weight(const std::string& s) {
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf" || s == "neginf")
    return -std::numeric_limits<double>::infinity();
  try {
    size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw ValidationError("");
    return v;
  } catch (...) {
    throw ValidationError(strcat("not a weight: '", s, "'"));
  }
}

inline std::string weight_to_string(double w) {
  if (w == -std::numeric_limits<double>::infinity()) return "-inf";
  if (w == std::numeric_limits<double>::infinity()) return "inf";
  std::ostringstream os;
  os << w;
  return os.str();
}

inline Vocabulary load_vocab(const std::string& path) {
  if (path.empty()) return Vocabulary::cmu_monophones(true);
  return Vocabulary::load(path);
}

inline Lexicon load_lexicon(const std::string& path, const Vocabulary& vocab) {
  if (path.empty()) return Lexicon::phone_lexicon(vocab);
  return Lexicon::load(path, vocab);
}

inline std::string dir_of(const std::string& path) {
  std::filesystem::path p(path);
  auto parent = p.parent_path();
  return parent.empty() ? std::string(".") : parent.string();
}

// Level spec: a preset name (snr-5, snr0, snr5, snr10, snr15, snr20) or
// `name:mask=X,sub=Y,ins=Z`.
inline CorruptionConfig parse_level(const std::string& spec) {
  auto colon = spec.find(':');
  if (colon == std::string::npos) {
    for (const CorruptionConfig& c : default_levels())
      if (c.name == spec) return c;
    throw ValidationError(strcat("unknown corruption level preset: ", spec));
  }
  CorruptionConfig c;
  c.name = spec.substr(0, colon);
  std::istringstream is(spec.substr(colon + 1));
  std::string field;
  while (std::getline(is, field, ',')) {
    auto eq = field.find('=');
    if (eq == std::string::npos)
      throw ValidationError(strcat("bad level field '", field, "' in ", spec));
    std::string key = field.substr(0, eq);
    double value = std::stod(field.substr(eq + 1));
    if (key == "mask")
      c.mask_fraction = value;
    else if (key == "sub")
      c.substitution_rate = value;
    else if (key == "ins")
      c.insertion_rate = value;
    else
      throw ValidationError(strcat("unknown level key '", key, "' in ", spec));
  }
  c.validate();
  return c;
}

struct GraphFlags {
  std::string vocab_path;
  std::string lexicon_path;
  std::string keyword;
  bool background = true;
  double background_weight = 0.0;
  double entry_bonus = 0.0;
  bool boundary_self_loops = false;
};

struct BuiltGraphs {
  Vocabulary vocab;
  SearchSpace ctc;
  SearchSpace ntc;
};

inline BuiltGraphs build_graphs(const GraphFlags& flags) {
  Vocabulary vocab = load_vocab(flags.vocab_path);
  if (!vocab.has_wildcards())
    throw ValidationError("decoding graphs need a wildcard vocabulary");
  Lexicon lex = load_lexicon(flags.lexicon_path, vocab);
  std::vector<std::string> kw = split_words(flags.keyword);
  if (kw.empty()) throw ValidationError("empty --keyword");

  GrammarOptions gopts;
  gopts.background_path = flags.background;
  gopts.background_weight = flags.background_weight;
  gopts.keyword_entry_bonus = flags.entry_bonus;

  WeightedFst t = build_token_fst(vocab);
  WeightedFst l = build_lexicon_fst(lex);
  WeightedFst g = build_kws_grammar(lex, kw, gopts);
  WildcardOptions wopts;
  wopts.boundary_self_loops = flags.boundary_self_loops;
  // Decode graphs carry zero-weight wildcard arcs; the decoder injects the
  // decode-time lambda values.
  WeightedFst g_ntc = add_wildcard_arcs(g, 0.0, 0.0, wopts);

  BuiltGraphs out{std::move(vocab), compile_search_space(t, l, g),
                  compile_search_space(t, l, g_ntc)};
  out.ctc.keyword = join_words(kw);
  out.ntc.keyword = out.ctc.keyword;
  return out;
}

// Decodes every manifest utterance against one graph; detections come back
// sorted by utterance, independent of the worker count.
inline std::vector<Detection> decode_manifest(const SearchSpace& space,
                                              const std::vector<ManifestEntry>& manifest,
                                              const std::string& data_dir,
                                              const DecoderConfig& cfg, int jobs) {
  bool wants_wildcards = space.has_wildcard_arcs() ||
                         (space.graph.input_symbols &&
                          space.graph.input_symbols->find(kSelfLoopSymbol) != -1);
  std::optional<Vocabulary> vocab;
  if (space.graph.input_symbols)
    vocab = Vocabulary::from_table(*space.graph.input_symbols);

  std::vector<std::vector<Detection>> per_utt(manifest.size());
  parallel_for(manifest.size(), jobs, [&](size_t i) {
    const ManifestEntry& e = manifest[i];
    Posteriorgram p = Posteriorgram::load(data_dir + "/" + e.file);
    if (wants_wildcards && !p.has_wildcards() && vocab)
      p = augment_wildcards(p, *vocab);
    DecodeResult r = decode_utterance(p, space, cfg, e.utt);
    per_utt[i] = std::move(r.detections);
  });
  std::vector<Detection> all;
  for (auto& v : per_utt) all.insert(all.end(), v.begin(), v.end());
  sort_detections(all);
  return all;
}

inline double negative_hours(const std::vector<ManifestEntry>& manifest,
                             const std::string& data_dir, double fps) {
  int64_t frames = 0;
  for (const auto& e : manifest)
    if (e.label == 0) frames += Posteriorgram::peek_frames(data_dir + "/" + e.file);
  return static_cast<double>(frames) / fps / 3600.0;
}

inline void write_json_file(const nlohmann::ordered_json& j, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError(strcat("cannot write ", path));
  os << j.dump(2) << '\n';
}

// Average of per-level recalls at one operating point, the summary number
// used by the ablation tables.
inline double average_level_recall(const EvalReport& report, double far_target) {
  for (const auto& op : report.operating_points) {
    if (op.far_target != far_target) continue;
    double sum = 0.0;
    int n = 0;
    for (const auto& lr : op.per_level) {
      sum += lr.recall;
      ++n;
    }
    return n > 0 ? sum / n : 0.0;
  }
  throw ValidationError(strcat("no operating point at FAR ", far_target));
}

}  // namespace detail

struct CommandContext {
  std::ostream* out = &std::cout;
  std::ostream* err = &std::cerr;
};

// The train/decode combination matrix plus the decode-time lambda grid,
// on synthetic datasets.
//
// The train-criterion axis is an emission proxy, not actual training:
// a plain-CTC model presses noise-dominated frames into confident wrong
// phonemes (the confused profile), while a noise-aware model hedges them
// toward the flat profile (the uniform profile). The decode axis switches
// between the plain and the wildcard search space. Each cell writes its
// detections and an evaluation report; a summary collects the averages.
inline int run_ablation(const std::string& keyword, const std::string& out_dir,
                        uint64_t seed, int n_pos, int n_neg, int neg_frames,
                        double far, int max_active, int jobs,
                        const CommandContext& io) {
  Vocabulary vocab = Vocabulary::cmu_monophones(true);
  Lexicon lex = Lexicon::phone_lexicon(vocab);
  std::vector<std::string> kw = detail::split_words(keyword);
  if (kw.empty()) throw ValidationError("empty --keyword");

  std::filesystem::create_directories(out_dir);
  detail::GraphFlags gf;
  gf.keyword = keyword;
  detail::BuiltGraphs graphs = detail::build_graphs(gf);
  save_search_space(graphs.ctc, out_dir + "/s_ctc");
  save_search_space(graphs.ntc, out_dir + "/s_ntc");

  DatasetParams params;
  params.keyword_tokens = lex.phonemes_of(kw);
  params.n_pos = n_pos;
  params.n_neg = n_neg;
  params.neg_frames = neg_frames;
  std::vector<CorruptionConfig> levels = default_levels();

  struct TrainSide {
    const char* name;
    CorruptionConfig::MaskProfile profile;
  };
  const TrainSide sides[] = {
      {"ctc", CorruptionConfig::MaskProfile::kConfused},
      {"ntc", CorruptionConfig::MaskProfile::kUniform},
  };
  std::map<std::string, std::vector<ManifestEntry>> manifests;
  for (int i = 0; i < 2; ++i) {
    params.profile = sides[i].profile;
    manifests[sides[i].name] =
        make_dataset(vocab, params, levels, out_dir + "/dataset_train_" +
                     sides[i].name, split_seed(seed, i), jobs);
  }

  DecoderConfig cfg;
  cfg.max_active = max_active;
  cfg.confidence_threshold = 0.02;
  cfg.lambda_self_loop = 4.0;
  cfg.lambda_bypass = 2.0;

  EvalOptions eopts;
  eopts.far_targets = {far};

  nlohmann::ordered_json summary;
  summary["keyword"] = detail::join_words(kw);
  summary["far_target"] = far;

  auto run_cell = [&](const std::string& train, const SearchSpace& space,
                      const DecoderConfig& cell_cfg, const std::string& stem) {
    const std::string data_dir = out_dir + "/dataset_train_" + train;
    const auto& manifest = manifests[train];
    std::vector<Detection> dets =
        detail::decode_manifest(space, manifest, data_dir, cell_cfg, jobs);
    {
      std::ofstream os(out_dir + "/" + stem + ".jsonl");
      if (!os) throw IoError(strcat("cannot write ", stem, ".jsonl"));
      write_detections_jsonl(dets, os);
    }
    EvalOptions opts = eopts;
    opts.neg_hours = detail::negative_hours(manifest, data_dir,
                                            opts.frames_per_second);
    EvalReport report = evaluate(dets, manifest, opts);
    detail::write_json_file(report_to_json(report), out_dir + "/" + stem + ".json");
    return detail::average_level_recall(report, far);
  };

  // Table-style 2x2: train criterion (emission proxy) x decoding graph.
  summary["cells"] = nlohmann::ordered_json::object();
  for (const TrainSide& train : sides) {
    for (const char* dec : {"ctc", "ntc"}) {
      const SearchSpace& space =
          std::string(dec) == "ctc" ? graphs.ctc : graphs.ntc;
      std::string stem = strcat("cell_", train.name, "_", dec);
      double avg = run_cell(train.name, space, cfg, stem);
      summary["cells"][strcat("train_", train.name, "/decode_", dec)] = avg;
      (*io.out) << "cell train=" << train.name << " decode=" << dec
                << " avg_recall=" << avg << "\n";
    }
  }

  // Decode-time lambda grid, on the noise-aware dataset and graph.
  const double neg_inf = -std::numeric_limits<double>::infinity();
  const std::pair<double, double> grid[] = {
      {4, 2}, {4, 4}, {4, 0}, {4, neg_inf}, {2, 2}, {0, 2}, {neg_inf, 2}};
  summary["lambda_grid"] = nlohmann::ordered_json::array();
  for (const auto& [lambda_sl, lambda_bp] : grid) {
    DecoderConfig row_cfg = cfg;
    row_cfg.lambda_self_loop = lambda_sl;
    row_cfg.lambda_bypass = lambda_bp;
    std::string stem = strcat("grid_", detail::weight_to_string(lambda_sl), "_",
                              detail::weight_to_string(lambda_bp));
    double avg = run_cell("ntc", graphs.ntc, row_cfg, stem);
    nlohmann::ordered_json row;
    row["lambda_self_loop"] = detail::weight_to_string(lambda_sl);
    row["lambda_bypass"] = detail::weight_to_string(lambda_bp);
    row["avg_recall"] = avg;
    summary["lambda_grid"].push_back(row);
    (*io.out) << "grid lambda_@=" << detail::weight_to_string(lambda_sl)
              << " lambda_*=" << detail::weight_to_string(lambda_bp)
              << " avg_recall=" << avg << "\n";
  }

  detail::write_json_file(summary, out_dir + "/summary.json");
  return kOk;
}

inline int run(std::vector<std::string> args, const CommandContext& io = {}) {
  CLI::App app{"Noise-aware CTC keyword spotting engine"};
  app.set_config("--config", "", "Read options from a config file");
  std::string dump_config_path;
  app.add_option("--dump-config", dump_config_path,
                 "Write the effective configuration to this file and continue");
  app.require_subcommand(0, 1);

  // ---- shared option storage ----
  struct {
    detail::GraphFlags graph;
    std::string out_dir = "graphs";
    std::vector<std::string> emit = {"ctc", "ntc"};
  } bg;
  struct {
    std::string post, transcript, vocab, lexicon, out, grad_out, occ_out;
    std::string criterion = "ctc";
    int epoch = 0;
    PenaltySchedule schedule;
  } lo;
  struct {
    std::string manifest, graph_prefix, out = "detections.jsonl";
    std::string lambda_self_loop = "4", lambda_bypass = "2";
    DecoderConfig cfg;
    int jobs = 1;
  } de;
  struct {
    std::string keyword, vocab, out_dir = "dataset";
    std::vector<std::string> levels;
    std::string profile = "uniform";
    DatasetParams params;
    uint64_t seed = 1;
    int jobs = 1;
  } si;
  struct {
    std::string dets, refs, out = "report.json", curve_out;
    std::vector<double> fars;
    double fps = 100.0;
    double neg_hours = 0.0;
    bool span_match = false;
    int collar = 10;
    int jobs = 1;
  } ev;
  struct {
    std::string keyword = "HH EY1 S N IH1 P S";
    std::string out_dir = "ablation";
    uint64_t seed = 7;
    int n_pos = 60;
    int n_neg = 600;
    int neg_frames = 240;
    double far = 2.5;
    int jobs = 1;
    int max_active = 20;
  } ab;

  // ---- build-graph ----
  CLI::App* build = app.add_subcommand(
      "build-graph", "Compile keyword decoding graphs (plain and wildcard)");
  build->add_option("--vocab", bg.graph.vocab_path,
                    "Token symbol table; default: built-in CMU monophones");
  build->add_option("--lexicon", bg.graph.lexicon_path,
                    "Lexicon file (word ph1 ph2 ...); default: one word per phone");
  build->add_option("--keyword", bg.graph.keyword, "Keyword word sequence")
      ->required();
  build->add_flag("--background,!--no-background", bg.graph.background,
                  "Include the background absorption path (default on)");
  build->add_option("--background-weight", bg.graph.background_weight,
                    "Per-word background arc weight");
  build->add_option("--entry-bonus", bg.graph.entry_bonus,
                    "Weight added on keyword entry arcs");
  build->add_flag("--boundary-self-loops", bg.graph.boundary_self_loops,
                  "Also place wildcard self-loops at the keyword boundaries");
  build->add_option("--emit", bg.emit, "Graphs to emit (ctc, ntc)");
  build->add_option("--out-dir", bg.out_dir, "Output directory");

  // ---- loss ----
  CLI::App* loss_cmd =
      app.add_subcommand("loss", "Criterion loss/gradient for one utterance");
  loss_cmd->add_option("--post", lo.post, "Posteriorgram file")->required();
  loss_cmd->add_option("--transcript", lo.transcript, "Transcript word sequence")
      ->required();
  loss_cmd->add_option("--vocab", lo.vocab, "Token symbol table");
  loss_cmd->add_option("--lexicon", lo.lexicon, "Lexicon file");
  loss_cmd->add_option("--criterion", lo.criterion, "ctc or ntc");
  loss_cmd->add_option("--epoch", lo.epoch, "Training epoch for the penalty schedule");
  loss_cmd->add_option("--lambda0-self-loop", lo.schedule.lambda0_self_loop,
                       "Initial self-loop penalty");
  loss_cmd->add_option("--beta-self-loop", lo.schedule.beta_self_loop,
                       "Self-loop penalty decay per epoch");
  loss_cmd->add_option("--lambda0-bypass", lo.schedule.lambda0_bypass,
                       "Initial bypass penalty");
  loss_cmd->add_option("--beta-bypass", lo.schedule.beta_bypass,
                       "Bypass penalty decay per epoch");
  loss_cmd->add_option("--grad-out", lo.grad_out,
                       "Write d loss / d log-posterior as a binary matrix");
  loss_cmd->add_option("--occ-out", lo.occ_out,
                       "Write forward-backward occupancies as a binary matrix");
  loss_cmd->add_option("--out", lo.out, "Write a JSON loss record here");

  // ---- decode ----
  CLI::App* decode_cmd =
      app.add_subcommand("decode", "Decode a dataset manifest into detections");
  decode_cmd->add_option("--manifest", de.manifest, "Dataset manifest JSONL")
      ->required();
  decode_cmd->add_option("--graph", de.graph_prefix,
                         "Search-space file prefix from build-graph")
      ->required();
  decode_cmd->add_option("--out", de.out, "Detections JSONL path");
  decode_cmd->add_option("--max-active", de.cfg.max_active,
                         "Beam: maximum live hypotheses per frame");
  decode_cmd->add_option("--lambda-self-loop", de.lambda_self_loop,
                         "Decode-time self-loop arc score (number or -inf)");
  decode_cmd->add_option("--lambda-bypass", de.lambda_bypass,
                         "Decode-time bypass arc score (number or -inf)");
  decode_cmd->add_option("--threshold", de.cfg.confidence_threshold,
                         "Confidence floor for emitted detections");
  decode_cmd->add_option("--min-real-tokens", de.cfg.min_real_tokens,
                         "Discard paths with fewer real keyword tokens");
  decode_cmd->add_option("--jobs", de.jobs, "Worker threads");

  // ---- simulate ----
  CLI::App* sim_cmd =
      app.add_subcommand("simulate", "Synthesize a corrupted evaluation dataset");
  sim_cmd->add_option("--keyword", si.keyword, "Keyword word sequence")->required();
  sim_cmd->add_option("--vocab", si.vocab, "Token symbol table");
  sim_cmd->add_option("--n-pos", si.params.n_pos, "Positives per level");
  sim_cmd->add_option("--n-neg", si.params.n_neg, "Negative utterances");
  sim_cmd->add_option("--neg-frames", si.params.neg_frames,
                      "Approximate frames per negative");
  sim_cmd->add_option("--dwell", si.params.dwell, "Frames per token");
  sim_cmd->add_option("--context", si.params.context_tokens,
                      "Random context tokens around the keyword");
  sim_cmd->add_option("--sharpness", si.params.sharpness,
                      "Peak probability of clean emissions");
  sim_cmd->add_option("--profile", si.profile,
                      "Noise profile: uniform or confused");
  sim_cmd->add_option("--level", si.levels,
                      "Corruption level (preset name or name:mask=..,sub=..,ins=..); "
                      "repeatable; default: the six built-in presets");
  sim_cmd->add_option("--out-dir", si.out_dir, "Output directory");
  sim_cmd->add_option("--seed", si.seed, "Master seed");
  sim_cmd->add_option("--jobs", si.jobs, "Worker threads");

  // ---- evaluate ----
  CLI::App* eval_cmd =
      app.add_subcommand("evaluate", "Score detections against a reference manifest");
  eval_cmd->add_option("--dets", ev.dets, "Detections JSONL")->required();
  eval_cmd->add_option("--refs", ev.refs, "Reference manifest JSONL")->required();
  eval_cmd->add_option("--far", ev.fars,
                       "FAR target per hour (repeatable; default 0.05 0.5 1.0)");
  eval_cmd->add_option("--fps", ev.fps, "Frames per second of the emissions");
  eval_cmd->add_option("--neg-hours", ev.neg_hours,
                       "Override the negative duration (else summed from files)");
  eval_cmd->add_flag("--span-match", ev.span_match,
                     "Require span overlap instead of utterance-level hits");
  eval_cmd->add_option("--collar", ev.collar, "Span matching collar in frames");
  eval_cmd->add_option("--out", ev.out, "Report JSON path");
  eval_cmd->add_option("--curve-out", ev.curve_out, "DET staircase CSV path");
  eval_cmd->add_option("--jobs", ev.jobs, "Worker threads (reserved)");

  // ---- ablate ----
  CLI::App* ab_cmd = app.add_subcommand(
      "ablate", "Run the train/decode combination matrix and the lambda grid");
  ab_cmd->add_option("--keyword", ab.keyword, "Keyword word sequence");
  ab_cmd->add_option("--out-dir", ab.out_dir, "Output directory");
  ab_cmd->add_option("--seed", ab.seed, "Master seed");
  ab_cmd->add_option("--n-pos", ab.n_pos, "Positives per level per dataset");
  ab_cmd->add_option("--n-neg", ab.n_neg, "Negatives per dataset");
  ab_cmd->add_option("--neg-frames", ab.neg_frames, "Frames per negative");
  ab_cmd->add_option("--far", ab.far, "FAR target per hour for cell reports");
  ab_cmd->add_option("--max-active", ab.max_active, "Beam width");
  ab_cmd->add_option("--jobs", ab.jobs, "Worker threads");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      (*io.out) << app.help();
      return kOk;
    }
    nlohmann::ordered_json rec;
    rec["error"] = "usage";
    rec["message"] = e.what();
    (*io.err) << rec.dump() << '\n';
    return kUsageError;
  }

  try {
    if (!dump_config_path.empty()) {
      std::ofstream os(dump_config_path);
      if (!os) throw IoError(strcat("cannot write ", dump_config_path));
      os << app.config_to_str(true, true);
    }

    if (build->parsed()) {
      detail::BuiltGraphs graphs = detail::build_graphs(bg.graph);
      std::filesystem::create_directories(bg.out_dir);
      for (const std::string& which : bg.emit) {
        if (which == "ctc")
          save_search_space(graphs.ctc, bg.out_dir + "/s_ctc");
        else if (which == "ntc")
          save_search_space(graphs.ntc, bg.out_dir + "/s_ntc");
        else
          throw ValidationError(strcat("unknown graph kind in --emit: ", which));
      }
      (*io.out) << "wrote graphs for keyword '" << graphs.ctc.keyword << "' to "
                << bg.out_dir << "\n";
      return kOk;
    }

    if (loss_cmd->parsed()) {
      Vocabulary vocab = detail::load_vocab(lo.vocab);
      LossContext ctx(detail::load_lexicon(lo.lexicon, vocab));
      Posteriorgram p = Posteriorgram::load(lo.post);
      std::vector<std::string> words = detail::split_words(lo.transcript);
      LossOptions opts;
      opts.gradient = !lo.grad_out.empty();
      opts.occupancy = !lo.occ_out.empty();
      LossResult res;
      double lambda_sl = 0.0, lambda_bp = 0.0;
      if (lo.criterion == "ctc") {
        res = ctc_loss(p, words, ctx, opts);
      } else if (lo.criterion == "ntc") {
        std::tie(lambda_sl, lambda_bp) = penalty_at_epoch(lo.schedule, lo.epoch);
        res = ntc_loss(p, words, ctx, lo.schedule, lo.epoch, opts);
      } else {
        throw ValidationError(strcat("unknown criterion: ", lo.criterion));
      }
      nlohmann::ordered_json j;
      j["criterion"] = lo.criterion;
      j["loss"] = res.feasible ? nlohmann::ordered_json(res.loss)
                               : nlohmann::ordered_json("inf");
      j["feasible"] = res.feasible;
      if (lo.criterion == "ntc") {
        j["epoch"] = lo.epoch;
        j["lambda_self_loop"] = lambda_sl;
        j["lambda_bypass"] = lambda_bp;
      }
      if (!lo.out.empty()) detail::write_json_file(j, lo.out);
      (*io.out) << j.dump() << '\n';
      if (opts.gradient && res.feasible) {
        Posteriorgram grad(res.frames, p.symbols());
        for (int t = 0; t < res.frames; ++t)
          for (int v = 0; v < res.tokens; ++v)
            grad.set_prob(t, v, res.gradient[static_cast<size_t>(t) * res.tokens + v]);
        grad.save_matrix(lo.grad_out);
      }
      if (opts.occupancy && res.feasible) {
        std::vector<std::string> occ_syms = p.symbols();
        while (static_cast<int>(occ_syms.size()) < res.occ_tokens)
          occ_syms.push_back(occ_syms.size() == p.symbols().size()
                                 ? kSelfLoopSymbol
                                 : kBypassSymbol);
        Posteriorgram occ(res.frames, occ_syms);
        for (int t = 0; t < res.frames; ++t)
          for (int v = 0; v < res.occ_tokens; ++v)
            occ.set_prob(t, v, res.occupancy[static_cast<size_t>(t) * res.occ_tokens + v]);
        occ.save_matrix(lo.occ_out);
      }
      return kOk;
    }

    if (decode_cmd->parsed()) {
      de.cfg.lambda_self_loop = detail::parse_weight(de.lambda_self_loop);
      de.cfg.lambda_bypass = detail::parse_weight(de.lambda_bypass);
      de.cfg.validate();
      SearchSpace space = load_search_space(de.graph_prefix);
      std::ifstream mf(de.manifest);
      if (!mf) throw IoError(strcat("cannot open manifest: ", de.manifest));
      std::vector<ManifestEntry> manifest = read_manifest_jsonl(mf);
      std::vector<Detection> dets = detail::decode_manifest(
          space, manifest, detail::dir_of(de.manifest), de.cfg, de.jobs);
      std::ofstream os(de.out);
      if (!os) throw IoError(strcat("cannot write ", de.out));
      write_detections_jsonl(dets, os);
      (*io.out) << "decoded " << manifest.size() << " utterances, " << dets.size()
                << " detections -> " << de.out << "\n";
      return kOk;
    }

    if (sim_cmd->parsed()) {
      Vocabulary vocab = detail::load_vocab(si.vocab);
      Lexicon lex = Lexicon::phone_lexicon(vocab);
      si.params.keyword_tokens = lex.phonemes_of(detail::split_words(si.keyword));
      if (si.profile == "uniform")
        si.params.profile = CorruptionConfig::MaskProfile::kUniform;
      else if (si.profile == "confused")
        si.params.profile = CorruptionConfig::MaskProfile::kConfused;
      else
        throw ValidationError(strcat("unknown profile: ", si.profile));
      std::vector<CorruptionConfig> levels;
      if (si.levels.empty())
        levels = default_levels();
      else
        for (const auto& spec : si.levels) levels.push_back(detail::parse_level(spec));
      auto manifest =
          make_dataset(vocab, si.params, levels, si.out_dir, si.seed, si.jobs);
      (*io.out) << "wrote " << manifest.size() << " utterances to " << si.out_dir
                << "\n";
      return kOk;
    }

    if (eval_cmd->parsed()) {
      std::ifstream df(ev.dets);
      if (!df) throw IoError(strcat("cannot open detections: ", ev.dets));
      std::vector<Detection> dets = read_detections_jsonl(df);
      std::ifstream rf(ev.refs);
      if (!rf) throw IoError(strcat("cannot open references: ", ev.refs));
      std::vector<ManifestEntry> refs = read_manifest_jsonl(rf);

      EvalOptions opts;
      if (!ev.fars.empty()) opts.far_targets = ev.fars;
      opts.frames_per_second = ev.fps;
      opts.match.utterance_level = !ev.span_match;
      opts.match.collar = ev.collar;
      opts.neg_hours = ev.neg_hours > 0.0
                           ? ev.neg_hours
                           : detail::negative_hours(refs, detail::dir_of(ev.refs),
                                                    ev.fps);
      EvalReport report = evaluate(dets, refs, opts);
      nlohmann::ordered_json j = report_to_json(report);
      detail::write_json_file(j, ev.out);
      if (!ev.curve_out.empty()) {
        std::ofstream cs(ev.curve_out);
        if (!cs) throw IoError(strcat("cannot write ", ev.curve_out));
        write_curve_csv(report.curve, cs);
      }
      for (const auto& op : report.operating_points)
        (*io.out) << "far=" << op.far_target << "/h recall=" << op.overall_recall
                  << " threshold=" << op.threshold << "\n";
      return kOk;
    }

    if (ab_cmd->parsed()) {
      return run_ablation(ab.keyword, ab.out_dir, ab.seed, ab.n_pos, ab.n_neg,
                          ab.neg_frames, ab.far, ab.max_active, ab.jobs, io);
    }

    (*io.out) << app.help();
    return kOk;
  } catch (const IoError& e) {
    nlohmann::ordered_json rec;
    rec["error"] = "io";
    rec["message"] = e.what();
    (*io.err) << rec.dump() << '\n';
    return kIoErrorCode;
  } catch (const ValidationError& e) {
    nlohmann::ordered_json rec;
    rec["error"] = "validation";
    rec["message"] = e.what();
    (*io.err) << rec.dump() << '\n';
    return kValidationErrorCode;
  } catch (const std::exception& e) {
    nlohmann::ordered_json rec;
    rec["error"] = "internal";
    rec["message"] = e.what();
    (*io.err) << rec.dump() << '\n';
    return kInternalError;
  }
}

}  // namespace cli
}  // namespace ntckws

#endif  // NTCKWS_CLI_HPP_
