// tools/rtrack_main.cpp

// Copyright 2026  rtrack authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Single pipeline binary: gen | train | align | track | eval.
// Exit codes: 0 ok, 2 config/usage, 3 I/O, 4 data validation.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rtrack/aligner.hpp"
#include "rtrack/errors.hpp"
#include "rtrack/io.hpp"
#include "rtrack/metrics.hpp"
#include "rtrack/synth.hpp"
#include "rtrack/tracker.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rtrack;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitData = 4;

void echo_config(const std::string &cmd,
                 const std::vector<std::pair<std::string, std::string>> &kv) {
  std::cerr << "[" << cmd << "] effective config:";
  for (const auto &[k, v] : kv) std::cerr << ' ' << k << '=' << v;
  std::cerr << '\n';
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// Config (de)serialization for checkpoint sidecars.

json to_json(const aligner::AedConfig &c) {
  return json{{"vocab", c.vocab},
              {"feat_dim", c.feat_dim},
              {"embed_dim", c.embed_dim},
              {"enc_hidden", c.enc_hidden},
              {"dec_hidden", c.dec_hidden},
              {"attn_dim", c.attn_dim},
              {"enc_layers", c.enc_layers},
              {"pyramid_factor", c.pyramid_factor},
              {"learning_rate", c.learning_rate},
              {"clip_norm", c.clip_norm},
              {"epochs", c.epochs},
              {"holdout_fraction", c.holdout_fraction},
              {"seed", c.seed}};
}

aligner::AedConfig aed_config_from_json(const json &j) {
  aligner::AedConfig c;
  c.vocab = j.value("vocab", c.vocab);
  c.feat_dim = j.value("feat_dim", c.feat_dim);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.enc_hidden = j.value("enc_hidden", c.enc_hidden);
  c.dec_hidden = j.value("dec_hidden", c.dec_hidden);
  c.attn_dim = j.value("attn_dim", c.attn_dim);
  c.enc_layers = j.value("enc_layers", c.enc_layers);
  c.pyramid_factor = j.value("pyramid_factor", c.pyramid_factor);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.epochs = j.value("epochs", c.epochs);
  c.holdout_fraction = j.value("holdout_fraction", c.holdout_fraction);
  c.seed = j.value("seed", c.seed);
  return c;
}

json to_json(const aligner::EmitterConfig &c) {
  return json{{"classes", c.classes},
              {"feat_dim", c.feat_dim},
              {"hidden", c.hidden},
              {"layers", c.layers},
              {"learning_rate", c.learning_rate},
              {"clip_norm", c.clip_norm},
              {"epochs", c.epochs},
              {"holdout_fraction", c.holdout_fraction},
              {"seed", c.seed}};
}

aligner::EmitterConfig emitter_config_from_json(const json &j) {
  aligner::EmitterConfig c;
  c.classes = j.value("classes", c.classes);
  c.feat_dim = j.value("feat_dim", c.feat_dim);
  c.hidden = j.value("hidden", c.hidden);
  c.layers = j.value("layers", c.layers);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.epochs = j.value("epochs", c.epochs);
  c.holdout_fraction = j.value("holdout_fraction", c.holdout_fraction);
  c.seed = j.value("seed", c.seed);
  return c;
}

json to_json(const tracker::TrackerConfig &c) {
  return json{{"vocab", c.vocab},
              {"feat_dim", c.feat_dim},
              {"embed_dim", c.embed_dim},
              {"text_hidden", c.text_hidden},
              {"text_layers", c.text_layers},
              {"speech_hidden", c.speech_hidden},
              {"speech_layers", c.speech_layers},
              {"pyramid_factor", c.pyramid_factor},
              {"attn_dim", c.attn_dim},
              {"learning_rate", c.learning_rate},
              {"clip_norm", c.clip_norm},
              {"epochs", c.epochs},
              {"holdout_fraction", c.holdout_fraction},
              {"tau", c.tau},
              {"w_hard", c.w_hard},
              {"w_soft", c.w_soft},
              {"seed", c.seed}};
}

tracker::TrackerConfig tracker_config_from_json(const json &j) {
  tracker::TrackerConfig c;
  c.vocab = j.value("vocab", c.vocab);
  c.feat_dim = j.value("feat_dim", c.feat_dim);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.text_hidden = j.value("text_hidden", c.text_hidden);
  c.text_layers = j.value("text_layers", c.text_layers);
  c.speech_hidden = j.value("speech_hidden", c.speech_hidden);
  c.speech_layers = j.value("speech_layers", c.speech_layers);
  c.pyramid_factor = j.value("pyramid_factor", c.pyramid_factor);
  c.attn_dim = j.value("attn_dim", c.attn_dim);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.epochs = j.value("epochs", c.epochs);
  c.holdout_fraction = j.value("holdout_fraction", c.holdout_fraction);
  c.tau = j.value("tau", c.tau);
  c.w_hard = j.value("w_hard", c.w_hard);
  c.w_soft = j.value("w_soft", c.w_soft);
  c.seed = j.value("seed", c.seed);
  return c;
}

json checkpoint_meta(const std::string &path) {
  std::string meta = load_checkpoint_meta(path);
  try {
    return json::parse(meta);
  } catch (const json::exception &e) {
    throw rtrack::ParseError("checkpoint sidecar " + path + ".json: " + e.what());
  }
}

std::string require_stage(const json &meta, const std::string &stage,
                          const std::string &path) {
  std::string got = meta.value("stage", "");
  if (got != stage)
    throw InvalidConfig("checkpoint " + path + " holds stage '" + got +
                        "', expected '" + stage + "'");
  return got;
}

void check_feat_dim(int model_dim, const Corpus &corpus) {
  for (const Utterance &u : corpus)
    if (u.frames.dim() != model_dim)
      throw InvalidConfig("corpus feature dim " +
                          std::to_string(u.frames.dim()) +
                          " does not match model dim " +
                          std::to_string(model_dim));
}

// Ground-truth and predicted spans for every spoken word of a corpus.
std::vector<metrics::SpanPair> span_pairs(
    const Utterance &u, const AlignmentMatrix &pred_t2s) {
  auto pred = metrics::word_spans_from_t2s(pred_t2s, u.chars,
                                           u.frames.frame_duration_s);
  auto truth = metrics::word_spans_from_t2s(u.truth_t2s, u.chars,
                                            u.frames.frame_duration_s);
  std::vector<metrics::SpanPair> pairs;
  for (size_t w = 0; w < truth.size(); ++w) {
    if (!truth[w]) continue;  // skipped words carry no truth span
    metrics::SpanPair p;
    p.t1 = truth[w]->t_start;
    p.t2 = truth[w]->t_end;
    if (pred[w]) {
      p.th1 = pred[w]->t_start;
      p.th2 = pred[w]->t_end;
    } else {
      p.th1 = p.th2 = p.t1;  // empty prediction scores Pr = 0
    }
    pairs.push_back(p);
  }
  return pairs;
}

std::string trim(const std::string &s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Expands key=value lines from a --config file into extra --key=value
// tokens. Keys already given on the command line win; unknown keys fall
// through to the regular unrecognized-option error.
std::vector<std::string> expand_config(int argc, char **argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string path;
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size())
      path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0)
      path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidConfig("config file " + path + " line " +
                          std::to_string(lineno) + " is not key=value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty())
      throw InvalidConfig("config file " + path + " line " +
                          std::to_string(lineno) + " has an empty key");
    std::string flag = "--" + key;
    bool given = false;
    for (const std::string &a : args)
      if (a == flag || a.rfind(flag + "=", 0) == 0) given = true;
    if (given) continue;
    args.push_back(val.empty() ? flag : flag + "=" + val);
  }
  return args;
}

std::map<std::string, AlignmentMatrix> load_supervision_dir(
    const std::string &dir, const Corpus &corpus) {
  std::map<std::string, AlignmentMatrix> out;
  for (const Utterance &u : corpus)
    out.emplace(u.id, read_alignment_tsv_file(dir + "/" + u.id + ".tsv"));
  return out;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"reading tracker pipeline"};
  app.require_subcommand(1);
  // Consumed up front by expand_config; declared so parsing accepts it.
  std::string cfg_file;

  // ---- gen ----
  std::string gen_texts, gen_out;
  int gen_random_texts = 0, gen_min_words = 10, gen_max_words = 20;
  synth::SynthConfig scfg;
  CLI::App *gen = app.add_subcommand("gen", "generate a synthetic corpus");
  gen->add_option("--config", cfg_file, "key=value config file");
  gen->add_option("--texts", gen_texts, "prompt file, one utterance per line");
  gen->add_option("--random-texts", gen_random_texts,
                  "generate this many random prompts instead of --texts");
  gen->add_option("--min-words", gen_min_words, "random prompt length floor");
  gen->add_option("--max-words", gen_max_words, "random prompt length cap");
  gen->add_option("--out", gen_out, "output corpus directory")->required();
  gen->add_option("--seed", scfg.seed, "rng seed");
  gen->add_option("--feature-dim", scfg.feature_dim, "acoustic feature size");
  gen->add_option("--dwell-min", scfg.dwell_min, "min frames per char");
  gen->add_option("--dwell-max", scfg.dwell_max, "max frames per char");
  gen->add_option("--noise-sigma", scfg.noise_sigma, "feature noise stddev");
  gen->add_option("--pause-prob", scfg.pause_prob, "pause chance after space");
  gen->add_option("--pause-len-min", scfg.pause_len_min, "min pause frames");
  gen->add_option("--pause-len-max", scfg.pause_len_max, "max pause frames");
  gen->add_option("--repeat-p", scfg.repeat_p, "word repeat rate");
  gen->add_option("--false-start-p", scfg.false_start_p, "false start rate");
  gen->add_option("--skip-p", scfg.skip_p, "word skip rate");
  gen->add_option("--frame-duration", scfg.frame_duration_s,
                  "seconds per frame");

  // ---- train ----
  std::string tr_stage, tr_corpus, tr_out, tr_signal = "hard";
  std::string tr_sup_hard, tr_sup_soft;
  bool tr_oracle = false;
  uint64_t tr_seed = 0;
  bool tr_seed_set = false;
  int tr_epochs = -1;
  double tr_lr = -1.0, tr_clip = -1.0, tr_holdout = -1.0;
  double tr_tau = -1.0, tr_w_hard = -1.0, tr_w_soft = -1.0;
  CLI::App *train = app.add_subcommand("train", "train a pipeline stage");
  train->add_option("--config", cfg_file, "key=value config file");
  train->add_option("--stage", tr_stage, "aed | ctc-emitter | tracker")
      ->required();
  train->add_option("--corpus", tr_corpus, "corpus directory")->required();
  train->add_option("--out", tr_out, "checkpoint output path")->required();
  train->add_option("--signal", tr_signal,
                    "tracker loss: hard | soft | combined");
  train->add_option("--supervision-hard", tr_sup_hard,
                    "directory of hard T2S TSVs keyed by utterance id");
  train->add_option("--supervision-soft", tr_sup_soft,
                    "directory of soft T2S TSVs keyed by utterance id");
  train->add_flag("--oracle", tr_oracle,
                  "use corpus ground truth as supervision");
  train->add_option("--seed", tr_seed, "rng seed")
      ->each([&](const std::string &) { tr_seed_set = true; });
  train->add_option("--epochs", tr_epochs, "training epochs");
  train->add_option("--lr", tr_lr, "learning rate");
  train->add_option("--clip-norm", tr_clip, "gradient clip norm");
  train->add_option("--holdout", tr_holdout, "held-out fraction");
  train->add_option("--tau", tr_tau, "sharpening temperature (tracker)");
  train->add_option("--w-hard", tr_w_hard, "hard loss weight (tracker)");
  train->add_option("--w-soft", tr_w_soft, "soft loss weight (tracker)");

  // ---- align ----
  std::string al_method, al_model, al_corpus, al_out;
  double al_threshold = 0.05;
  bool al_dump_emissions = false;
  CLI::App *align = app.add_subcommand("align", "force-align a corpus");
  align->add_option("--config", cfg_file, "key=value config file");
  align->add_option("--method", al_method, "aed | ctc | oracle")->required();
  align->add_option("--model", al_model, "aligner checkpoint");
  align->add_option("--corpus", al_corpus, "corpus directory")->required();
  align->add_option("--out", al_out, "output directory")->required();
  align->add_option("--hard-threshold", al_threshold,
                    "soft-to-hard weight threshold");
  align->add_flag("--dump-emissions", al_dump_emissions,
                  "also write per-frame emission TSVs (ctc)");

  // ---- track ----
  std::string tk_model, tk_corpus, tk_utterance, tk_out, tk_csv;
  double tk_tau = 0.1;
  CLI::App *track = app.add_subcommand("track", "stream-track a corpus");
  track->add_option("--config", cfg_file, "key=value config file");
  track->add_option("--model", tk_model, "tracker checkpoint")->required();
  track->add_option("--corpus", tk_corpus, "corpus directory")->required();
  track->add_option("--utterance", tk_utterance,
                    "track only this utterance id");
  track->add_option("--out", tk_out, "JSONL output path (default stdout)");
  track->add_option("--csv", tk_csv, "also write frame,word CSV");
  track->add_option("--tau", tk_tau, "sharpening temperature");

  // ---- eval ----
  std::string ev_kind, ev_pred, ev_truth;
  int ev_pyramid = 4;
  CLI::App *eval = app.add_subcommand("eval", "score predictions");
  eval->add_option("--config", cfg_file, "key=value config file");
  eval->add_option("--kind", ev_kind, "align | track")->required();
  eval->add_option("--pred", ev_pred,
                   "alignment directory (align) or JSONL file (track)")
      ->required();
  eval->add_option("--truth", ev_truth, "ground-truth corpus directory")
      ->required();
  eval->add_option("--pyramid-factor", ev_pyramid,
                   "tracker downsampling factor (track)");

  try {
    std::vector<std::string> args = expand_config(argc, argv);
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvalidConfig &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError &e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kExitIo;
  }

  try {
    // ---- gen ----
    if (gen->parsed()) {
      echo_config("gen", {{"texts", gen_texts},
                          {"random_texts", std::to_string(gen_random_texts)},
                          {"min_words", std::to_string(gen_min_words)},
                          {"max_words", std::to_string(gen_max_words)},
                          {"out", gen_out},
                          {"seed", std::to_string(scfg.seed)},
                          {"feature_dim", std::to_string(scfg.feature_dim)},
                          {"dwell", std::to_string(scfg.dwell_min) + ".." +
                                        std::to_string(scfg.dwell_max)},
                          {"noise_sigma", fmt(scfg.noise_sigma)},
                          {"pause_prob", fmt(scfg.pause_prob)},
                          {"repeat_p", fmt(scfg.repeat_p)},
                          {"false_start_p", fmt(scfg.false_start_p)},
                          {"skip_p", fmt(scfg.skip_p)},
                          {"frame_duration", fmt(scfg.frame_duration_s)}});
      scfg.validate();
      std::vector<std::string> texts;
      if (!gen_texts.empty()) {
        std::ifstream in(gen_texts);
        if (!in) throw IoError("cannot open " + gen_texts);
        std::string line;
        while (std::getline(in, line))
          if (!line.empty()) texts.push_back(line);
      } else if (gen_random_texts > 0) {
        if (gen_min_words < 1 || gen_max_words < gen_min_words)
          throw InvalidConfig("bad --min-words/--max-words range");
        std::mt19937_64 rng(scfg.seed);
        for (int i = 0; i < gen_random_texts; ++i)
          texts.push_back(synth::random_text(rng, gen_min_words, gen_max_words));
      } else {
        throw InvalidConfig("one of --texts or --random-texts is required");
      }
      synth::gen_corpus(texts, scfg, gen_out);
      std::cerr << "[gen] wrote " << texts.size() << " utterances to "
                << gen_out << '\n';
      return kExitOk;
    }

    // ---- train ----
    if (train->parsed()) {
      echo_config("train",
                  {{"stage", tr_stage},
                   {"corpus", tr_corpus},
                   {"out", tr_out},
                   {"signal", tr_signal},
                   {"supervision_hard", tr_sup_hard},
                   {"supervision_soft", tr_sup_soft},
                   {"oracle", tr_oracle ? "1" : "0"},
                   {"seed", tr_seed_set ? std::to_string(tr_seed) : "default"},
                   {"epochs", std::to_string(tr_epochs)},
                   {"lr", fmt(tr_lr)},
                   {"holdout", fmt(tr_holdout)}});
      Corpus corpus = load_corpus(tr_corpus);
      if (corpus.empty()) throw InvalidCorpus("empty corpus in " + tr_corpus);

      if (tr_stage == "aed") {
        aligner::AedConfig cfg;
        cfg.feat_dim = corpus[0].frames.dim();
        if (tr_seed_set) cfg.seed = tr_seed;
        if (tr_epochs >= 0) cfg.epochs = tr_epochs;
        if (tr_lr >= 0.0) cfg.learning_rate = tr_lr;
        if (tr_clip >= 0.0) cfg.clip_norm = tr_clip;
        if (tr_holdout >= 0.0) cfg.holdout_fraction = tr_holdout;
        aligner::AedModel model = aligner::train_aed(corpus, cfg);
        json meta{{"stage", "aed"}, {"config", to_json(cfg)}};
        save_checkpoint(tr_out, model.params(), meta.dump(2));
      } else if (tr_stage == "ctc-emitter") {
        aligner::EmitterConfig cfg;
        cfg.feat_dim = corpus[0].frames.dim();
        if (tr_seed_set) cfg.seed = tr_seed;
        if (tr_epochs >= 0) cfg.epochs = tr_epochs;
        if (tr_lr >= 0.0) cfg.learning_rate = tr_lr;
        if (tr_clip >= 0.0) cfg.clip_norm = tr_clip;
        if (tr_holdout >= 0.0) cfg.holdout_fraction = tr_holdout;
        aligner::EmitterModel model = aligner::train_ctc_emitter(corpus, cfg);
        json meta{{"stage", "ctc-emitter"}, {"config", to_json(cfg)}};
        save_checkpoint(tr_out, model.params(), meta.dump(2));
      } else if (tr_stage == "tracker") {
        tracker::Signal signal = tracker::signal_from_string(tr_signal);
        tracker::TrackerConfig cfg;
        cfg.feat_dim = corpus[0].frames.dim();
        if (tr_seed_set) cfg.seed = tr_seed;
        if (tr_epochs >= 0) cfg.epochs = tr_epochs;
        if (tr_lr >= 0.0) cfg.learning_rate = tr_lr;
        if (tr_clip >= 0.0) cfg.clip_norm = tr_clip;
        if (tr_holdout >= 0.0) cfg.holdout_fraction = tr_holdout;
        if (tr_tau > 0.0) cfg.tau = tr_tau;
        if (tr_w_hard >= 0.0) cfg.w_hard = tr_w_hard;
        if (tr_w_soft >= 0.0) cfg.w_soft = tr_w_soft;

        std::map<std::string, AlignmentMatrix> hard, soft;
        const bool need_hard = signal != tracker::Signal::Soft;
        const bool need_soft = signal != tracker::Signal::Hard;
        if (tr_oracle) {
          for (const Utterance &u : corpus) {
            if (need_hard) hard.emplace(u.id, u.truth_t2s);
            if (need_soft) soft.emplace(u.id, u.truth_t2s);
          }
        } else {
          if (need_hard) {
            if (tr_sup_hard.empty())
              throw InvalidConfig("--supervision-hard (or --oracle) required "
                                  "for signal " + tr_signal);
            hard = load_supervision_dir(tr_sup_hard, corpus);
          }
          if (need_soft) {
            if (tr_sup_soft.empty())
              throw InvalidConfig("--supervision-soft (or --oracle) required "
                                  "for signal " + tr_signal);
            soft = load_supervision_dir(tr_sup_soft, corpus);
          }
        }
        tracker::TrackerModel model =
            tracker::train_tracker(corpus, hard, soft, signal, cfg);
        json meta{{"stage", "tracker"},
                  {"signal", tracker::to_string(signal)},
                  {"config", to_json(cfg)}};
        save_checkpoint(tr_out, model.params(), meta.dump(2));
      } else {
        throw InvalidConfig("unknown --stage: " + tr_stage);
      }
      std::cerr << "[train] wrote checkpoint " << tr_out << '\n';
      return kExitOk;
    }

    // ---- align ----
    if (align->parsed()) {
      echo_config("align", {{"method", al_method},
                            {"model", al_model},
                            {"corpus", al_corpus},
                            {"out", al_out},
                            {"hard_threshold", fmt(al_threshold)},
                            {"dump_emissions", al_dump_emissions ? "1" : "0"}});
      Corpus corpus = load_corpus(al_corpus);
      std::error_code ec;
      fs::create_directories(al_out + "/soft", ec);
      fs::create_directories(al_out + "/hard", ec);
      if (ec) throw IoError("cannot create " + al_out);

      std::optional<aligner::AedModel> aed;
      std::optional<aligner::EmitterModel> emitter;
      if (al_method == "aed") {
        if (al_model.empty()) throw InvalidConfig("--model required for aed");
        json meta = checkpoint_meta(al_model);
        require_stage(meta, "aed", al_model);
        aed.emplace(aed_config_from_json(meta.at("config")));
        load_checkpoint(al_model, aed->params());
        check_feat_dim(aed->cfg.feat_dim, corpus);
      } else if (al_method == "ctc") {
        if (al_model.empty()) throw InvalidConfig("--model required for ctc");
        json meta = checkpoint_meta(al_model);
        require_stage(meta, "ctc-emitter", al_model);
        emitter.emplace(emitter_config_from_json(meta.at("config")));
        load_checkpoint(al_model, emitter->params());
        check_feat_dim(emitter->cfg.feat_dim, corpus);
      } else if (al_method != "oracle") {
        throw InvalidConfig("unknown --method: " + al_method);
      }

      std::vector<metrics::SpanPair> pairs;
      for (const Utterance &u : corpus) {
        AlignmentMatrix soft, hard;
        if (al_method == "aed") {
          soft = aligner::aed_align(*aed, u.frames, u.chars);
          hard = threshold_to_hard(soft, al_threshold);
        } else if (al_method == "ctc") {
          hard = aligner::ctc_align(*emitter, u.frames, u.chars);
          soft = hard;
          soft.kind = AlignKind::Soft;
          if (al_dump_emissions)
            write_emission_tsv_file(al_out + "/" + u.id + ".emit.tsv",
                                    emitter->log_emissions(u.frames.frames));
        } else {  // oracle
          hard = u.truth_t2s;
          soft = u.truth_t2s;
          soft.kind = AlignKind::Soft;
        }
        write_alignment_tsv_file(al_out + "/soft/" + u.id + ".tsv", soft);
        write_alignment_tsv_file(al_out + "/hard/" + u.id + ".tsv", hard);
        auto up = span_pairs(u, hard);
        pairs.insert(pairs.end(), up.begin(), up.end());
      }
      metrics::SpanScores s = metrics::corpus_alignment_report(pairs);
      json report{{"Pr", s.pr}, {"Re", s.re}, {"Ja", s.ja},
                  {"n_words", pairs.size()}};
      std::cout << report.dump() << '\n';
      return kExitOk;
    }

    // ---- track ----
    if (track->parsed()) {
      echo_config("track", {{"model", tk_model},
                            {"corpus", tk_corpus},
                            {"utterance", tk_utterance},
                            {"out", tk_out},
                            {"csv", tk_csv},
                            {"tau", fmt(tk_tau)}});
      if (!(tk_tau > 0.0)) throw InvalidConfig("--tau must be positive");
      json meta = checkpoint_meta(tk_model);
      require_stage(meta, "tracker", tk_model);
      tracker::TrackerModel model(tracker_config_from_json(meta.at("config")));
      load_checkpoint(tk_model, model.params());

      Corpus corpus = load_corpus(tk_corpus);
      if (!tk_utterance.empty()) {
        Corpus one;
        for (Utterance &u : corpus)
          if (u.id == tk_utterance) one.push_back(std::move(u));
        if (one.empty())
          throw InvalidConfig("utterance " + tk_utterance + " not in corpus");
        corpus = std::move(one);
      }
      check_feat_dim(model.cfg.feat_dim, corpus);
      for (const Utterance &u : corpus)
        if (u.frames.n() < 1)
          throw InvalidConfig("utterance " + u.id + " has no frames");

      std::ofstream out_file;
      std::ostream *out = &std::cout;
      if (!tk_out.empty()) {
        out_file.open(tk_out);
        if (!out_file) throw IoError("cannot open " + tk_out);
        out = &out_file;
      }
      std::ofstream csv;
      if (!tk_csv.empty()) {
        csv.open(tk_csv);
        if (!csv) throw IoError("cannot open " + tk_csv);
        csv << "utterance,frame,word\n";
      }
      for (const Utterance &u : corpus) {
        std::vector<tracker::TrackRecord> recs =
            tracker::track(model, u.chars, u.frames, tk_tau);
        for (size_t i = 0; i < recs.size(); ++i) {
          const tracker::TrackRecord &r = recs[i];
          json top5 = json::array();
          for (const auto &[c, w] : r.dist_top5) top5.push_back({c, w});
          json rec{{"utterance", u.id},
                   {"t", r.t},
                   {"word", r.word},
                   {"score", r.score},
                   {"dist_top5", top5}};
          *out << rec.dump() << '\n';
          if (csv.is_open()) csv << u.id << ',' << i << ',' << r.word << '\n';
        }
      }
      if (out == &out_file && !out_file) throw IoError("write failed: " + tk_out);
      return kExitOk;
    }

    // ---- eval ----
    if (eval->parsed()) {
      echo_config("eval", {{"kind", ev_kind},
                           {"pred", ev_pred},
                           {"truth", ev_truth},
                           {"pyramid_factor", std::to_string(ev_pyramid)}});
      Corpus corpus = load_corpus(ev_truth);
      json report{{"pr", nullptr},   {"re", nullptr},      {"ja", nullptr},
                  {"acc", nullptr},  {"f1", nullptr},      {"n_words", nullptr},
                  {"n_frames", nullptr}};
      if (ev_kind == "align") {
        std::vector<metrics::SpanPair> pairs;
        for (const Utterance &u : corpus) {
          AlignmentMatrix pred =
              read_alignment_tsv_file(ev_pred + "/" + u.id + ".tsv");
          auto up = span_pairs(u, pred);
          pairs.insert(pairs.end(), up.begin(), up.end());
        }
        metrics::SpanScores s = metrics::corpus_alignment_report(pairs);
        report["pr"] = s.pr;
        report["re"] = s.re;
        report["ja"] = s.ja;
        report["n_words"] = pairs.size();
      } else if (ev_kind == "track") {
        std::ifstream in(ev_pred);
        if (!in) throw IoError("cannot open " + ev_pred);
        std::map<std::string, std::vector<int>> pred_words;
        std::string line;
        size_t line_no = 0;
        while (std::getline(in, line)) {
          ++line_no;
          if (line.empty()) continue;
          try {
            json j = json::parse(line);
            pred_words[j.at("utterance").get<std::string>()].push_back(
                j.at("word").get<int>());
          } catch (const json::exception &e) {
            throw rtrack::ParseError(ev_pred + ":" + std::to_string(line_no) +
                                     ": " + e.what());
          }
        }
        std::vector<int> all_pred, all_truth;
        for (const Utterance &u : corpus) {
          auto it = pred_words.find(u.id);
          if (it == pred_words.end())
            throw InvalidInput("utterance " + u.id + " missing from " + ev_pred);
          std::vector<int> truth =
              downsample_frame_truth(u.frame_truth, ev_pyramid);
          if (truth.size() != it->second.size())
            throw InvalidInput(
                "utterance " + u.id + ": " + std::to_string(it->second.size()) +
                " predictions vs " + std::to_string(truth.size()) +
                " truth frames (check --pyramid-factor)");
          all_pred.insert(all_pred.end(), it->second.begin(), it->second.end());
          all_truth.insert(all_truth.end(), truth.begin(), truth.end());
        }
        report["acc"] = metrics::frame_word_accuracy(all_pred, all_truth);
        report["f1"] = metrics::frame_word_f1(all_pred, all_truth);
        report["n_frames"] = all_truth.size();
      } else {
        throw InvalidConfig("unknown --kind: " + ev_kind);
      }
      std::cout << report.dump() << '\n';
      return kExitOk;
    }
  } catch (const InvalidConfig &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError &e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kExitIo;
  } catch (const rtrack::ParseError &e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitIo;
  } catch (const rtrack::Error &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitConfig;
}
