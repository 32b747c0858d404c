// src/synth.cpp

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

#include "rtrack/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "rtrack/errors.hpp"

namespace rtrack::synth {

namespace {

// Engine-order-deterministic draws; <random> distributions are
// implementation-defined.
double uniform01(std::mt19937_64 &rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int uniform_int(std::mt19937_64 &rng, int lo, int hi) {
  return lo + static_cast<int>(rng() % static_cast<uint64_t>(hi - lo + 1));
}

double gauss(std::mt19937_64 &rng) {
  // Box-Muller; the second value is discarded to keep the stream simple.
  double u1 = uniform01(rng), u2 = uniform01(rng);
  u1 = std::max(u1, 1e-300);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

void SynthConfig::validate() const {
  if (vocab_size < 2 || feature_dim < 1) throw InvalidConfig("bad vocab/dim");
  if (dwell_min < 1 || dwell_max < dwell_min) throw InvalidConfig("bad dwell range");
  if (noise_sigma < 0.0) throw InvalidConfig("negative noise sigma");
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(pause_prob) || !prob(repeat_p) || !prob(false_start_p) || !prob(skip_p))
    throw InvalidConfig("probability outside [0,1]");
  if (repeat_p + false_start_p + skip_p > 1.0)
    throw InvalidConfig("disfluency rates sum above 1");
  if (!(frame_duration_s > 0.0)) throw InvalidConfig("bad frame duration");
}

Matrix make_codebook(const SynthConfig &cfg) {
  std::mt19937_64 rng(splitmix64(cfg.seed ^ 0xc0deb00cULL));
  Matrix cb(cfg.vocab_size, cfg.feature_dim);
  for (int r = 0; r < cb.rows; ++r) {
    double norm = 0.0;
    for (int c = 0; c < cb.cols; ++c) {
      cb.at(r, c) = gauss(rng);
      norm += cb.at(r, c) * cb.at(r, c);
    }
    norm = std::sqrt(norm);
    for (int c = 0; c < cb.cols; ++c) cb.at(r, c) /= norm;
  }
  return cb;
}

SpokenPlan base_plan(const CharSequence &chars) {
  std::vector<int> char_to_word(chars.size(), -1);
  for (int w = 0; w < chars.word_count(); ++w)
    for (int c = chars.word_extents[w].first; c < chars.word_extents[w].second; ++c)
      char_to_word[c] = w;
  SpokenPlan plan;
  for (int i = 0; i < chars.size(); ++i)
    plan.push_back({i, chars.chars[i], char_to_word[i]});
  return plan;
}

namespace {

// First contiguous run of tokens belonging to word w.
std::pair<size_t, size_t> word_block(const SpokenPlan &plan, int w) {
  size_t b = 0;
  while (b < plan.size() && plan[b].word_index != w) ++b;
  if (b == plan.size())
    throw InvalidOperation("word " + std::to_string(w) + " not in plan");
  size_t e = b;
  while (e < plan.size() && plan[e].word_index == w) ++e;
  return {b, e};
}

}  // namespace

DisfluencyEvent inject_disfluency(SpokenPlan &plan, DisfluencyEvent::Kind kind,
                                  int word_index, const CharSequence &chars) {
  if (plan.empty()) throw InvalidOperation("empty plan");
  auto [b, e] = word_block(plan, word_index);
  std::vector<SpokenToken> block(plan.begin() + b, plan.begin() + e);
  DisfluencyEvent ev;
  ev.kind = kind;
  ev.word_index = word_index;
  switch (kind) {
    case DisfluencyEvent::Kind::Repeat: {
      // The reader pauses between the two readings, so a separator space
      // goes between the duplicated blocks when the text has one.
      std::vector<SpokenToken> dup;
      int space_pos = -1;
      if (e < plan.size() && plan[e].word_index < 0) space_pos = plan[e].char_pos;
      else if (b > 0 && plan[b - 1].word_index < 0) space_pos = plan[b - 1].char_pos;
      if (space_pos >= 0) dup.push_back({space_pos, kSpaceChar, -1});
      dup.insert(dup.end(), block.begin(), block.end());
      plan.insert(plan.begin() + e, dup.begin(), dup.end());
      for (const SpokenToken &t : block) ev.detail += 'a' + chars.chars[t.char_pos];
      break;
    }
    case DisfluencyEvent::Kind::FalseStart: {
      size_t prefix = (block.size() + 1) / 2;
      plan.insert(plan.begin() + b, block.begin(), block.begin() + prefix);
      for (size_t i = 0; i < prefix; ++i)
        ev.detail += 'a' + chars.chars[block[i].char_pos];
      break;
    }
    case DisfluencyEvent::Kind::Skip: {
      if (chars.word_count() < 2)
        throw InvalidOperation("cannot skip the only word");
      plan.erase(plan.begin() + b, plan.begin() + e);
      for (const SpokenToken &t : block) ev.detail += 'a' + chars.chars[t.char_pos];
      break;
    }
  }
  return ev;
}

Utterance gen_utterance(const std::string &text, const SynthConfig &cfg,
                        uint64_t seed, std::optional<ForcedEvent> forced) {
  cfg.validate();
  if (text.empty()) throw InvalidInput("empty text");
  Utterance u;
  u.text = text;
  u.chars = make_char_sequence(text);
  u.seed = seed;
  std::mt19937_64 rng(splitmix64(seed));
  Matrix codebook = make_codebook(cfg);

  SpokenPlan plan = base_plan(u.chars);
  if (forced) {
    u.events.push_back(
        inject_disfluency(plan, forced->kind, forced->word_index, u.chars));
  } else {
    int skipped = 0;
    for (int w = 0; w < u.chars.word_count(); ++w) {
      double d = uniform01(rng);
      if (d < cfg.repeat_p) {
        u.events.push_back(
            inject_disfluency(plan, DisfluencyEvent::Kind::Repeat, w, u.chars));
      } else if (d < cfg.repeat_p + cfg.false_start_p) {
        u.events.push_back(inject_disfluency(
            plan, DisfluencyEvent::Kind::FalseStart, w, u.chars));
      } else if (d < cfg.repeat_p + cfg.false_start_p + cfg.skip_p &&
                 u.chars.word_count() - skipped > 1) {
        u.events.push_back(
            inject_disfluency(plan, DisfluencyEvent::Kind::Skip, w, u.chars));
        ++skipped;
      }
    }
  }

  // Emit frames: each token dwells a few frames of its codebook vector
  // plus noise; spaces may stretch into a longer pause of silence frames.
  struct FrameInfo { int char_pos; int code; };
  std::vector<FrameInfo> infos;
  std::vector<int> word_of_frame;
  for (const SpokenToken &tok : plan) {
    int dwell = uniform_int(rng, cfg.dwell_min, cfg.dwell_max);
    for (int k = 0; k < dwell; ++k) {
      infos.push_back({tok.char_pos, tok.code});
      word_of_frame.push_back(tok.word_index);
    }
    if (tok.word_index < 0 && uniform01(rng) < cfg.pause_prob) {
      int p = uniform_int(rng, cfg.pause_len_min, cfg.pause_len_max);
      for (int k = 0; k < p; ++k) {
        infos.push_back({tok.char_pos, kSilenceCode});
        word_of_frame.push_back(-1);
      }
    }
  }

  int n = static_cast<int>(infos.size());
  int m = u.chars.size();
  u.frames.frames = Matrix(n, cfg.feature_dim);
  u.frames.frame_duration_s = cfg.frame_duration_s;
  u.truth_t2s.orientation = Orientation::TextToSpeech;
  u.truth_t2s.kind = AlignKind::Hard;
  u.truth_t2s.values = Matrix(m, n);
  u.frame_truth = word_of_frame;
  for (int t = 0; t < n; ++t) {
    for (int c = 0; c < cfg.feature_dim; ++c)
      u.frames.frames.at(t, c) =
          codebook.at(infos[t].code, c) + cfg.noise_sigma * gauss(rng);
    u.truth_t2s.values.at(infos[t].char_pos, t) = 1.0;
  }
  return u;
}

std::string random_text(std::mt19937_64 &rng, int min_words, int max_words) {
  int words = uniform_int(rng, min_words, max_words);
  std::string text;
  for (int w = 0; w < words; ++w) {
    if (w) text += ' ';
    int len = uniform_int(rng, 2, 7);
    for (int i = 0; i < len; ++i)
      text += static_cast<char>('a' + uniform_int(rng, 0, 25));
  }
  return text;
}

Corpus gen_corpus_mem(const std::vector<std::string> &texts,
                      const SynthConfig &cfg) {
  if (texts.empty()) throw InvalidCorpus("no texts given");
  Corpus corpus;
  for (size_t i = 0; i < texts.size(); ++i) {
    uint64_t useed = splitmix64(cfg.seed + 0x1000 + i);
    Utterance u = gen_utterance(texts[i], cfg, useed);
    char id[32];
    std::snprintf(id, sizeof(id), "utt_%05zu", i);
    u.id = id;
    corpus.push_back(std::move(u));
  }
  return corpus;
}

void gen_corpus(const std::vector<std::string> &texts, const SynthConfig &cfg,
                const std::string &out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir + "/frames", ec);
  fs::create_directories(out_dir + "/truth", ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());

  Corpus corpus = gen_corpus_mem(texts, cfg);
  std::ofstream mf(out_dir + "/manifest.jsonl");
  if (!mf) throw IoError("cannot open manifest in " + out_dir);
  for (const Utterance &u : corpus) {
    std::string frames_file = "frames/" + u.id + ".rtrk";
    std::string truth_file = "truth/" + u.id + ".tsv";
    write_frames_blob(out_dir + "/" + frames_file, u.frames.frames);
    write_alignment_tsv_file(out_dir + "/" + truth_file, u.truth_t2s);
    nlohmann::json j;
    j["id"] = u.id;
    j["text"] = u.text;
    j["frames_file"] = frames_file;
    j["truth_file"] = truth_file;
    j["frame_duration_s"] = u.frames.frame_duration_s;
    j["seed"] = u.seed;
    nlohmann::json evs = nlohmann::json::array();
    for (const DisfluencyEvent &e : u.events)
      evs.push_back({{"kind", to_string(e.kind)},
                     {"word_index", e.word_index},
                     {"detail", e.detail}});
    j["events"] = evs;
    mf << j.dump() << '\n';
  }
  if (!mf) throw IoError("manifest write failed in " + out_dir);

  nlohmann::json meta;
  meta["vocab_size"] = cfg.vocab_size;
  meta["feature_dim"] = cfg.feature_dim;
  meta["dwell_min"] = cfg.dwell_min;
  meta["dwell_max"] = cfg.dwell_max;
  meta["noise_sigma"] = cfg.noise_sigma;
  meta["pause_prob"] = cfg.pause_prob;
  meta["pause_len_min"] = cfg.pause_len_min;
  meta["pause_len_max"] = cfg.pause_len_max;
  meta["repeat_p"] = cfg.repeat_p;
  meta["false_start_p"] = cfg.false_start_p;
  meta["skip_p"] = cfg.skip_p;
  meta["frame_duration_s"] = cfg.frame_duration_s;
  meta["seed"] = cfg.seed;
  std::ofstream ms(out_dir + "/meta.json");
  if (!ms) throw IoError("cannot open meta.json in " + out_dir);
  ms << meta.dump(2) << '\n';
}

}  // namespace rtrack::synth
