// include/rtrack/synth.hpp

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

#ifndef RTRACK_SYNTH_HPP_
#define RTRACK_SYNTH_HPP_

#include <optional>
#include <string>
#include <vector>

#include "rtrack/io.hpp"

namespace rtrack::synth {

struct SynthConfig {
  int vocab_size = kVocabSize;
  int feature_dim = 16;
  int dwell_min = 2, dwell_max = 6;       // frames per spoken char
  double noise_sigma = 0.3;
  double pause_prob = 0.2;                // extra silence after a space
  int pause_len_min = 2, pause_len_max = 8;
  double repeat_p = 0.0, false_start_p = 0.0, skip_p = 0.0;
  double frame_duration_s = 0.01;
  uint64_t seed = 1;

  void validate() const;
};

// A spoken token: which prompt character gets read next and which
// codebook vector the frames are emitted from.
struct SpokenToken {
  int char_pos;    // index into the prompt text
  int code;        // codebook row emitted
  int word_index;  // -1 for silence/space
};

using SpokenPlan = std::vector<SpokenToken>;

// Fixed codebook of unit feature vectors, one per vocabulary slot
// (letters, space, silence), seeded from cfg.seed.
Matrix make_codebook(const SynthConfig &cfg);

// The fluent reading plan for a prompt.
SpokenPlan base_plan(const CharSequence &chars);

// Apply one disfluency to the plan. Repeat duplicates the word's block,
// FalseStart prepends the first ceil(len/2) chars, Skip removes the block.
DisfluencyEvent inject_disfluency(SpokenPlan &plan, DisfluencyEvent::Kind kind,
                                  int word_index, const CharSequence &chars);

struct ForcedEvent {
  DisfluencyEvent::Kind kind;
  int word_index;
};

// Deterministic given (text, cfg, seed). When `forced` is set, random
// per-word disfluency draws are skipped and exactly that event is applied.
Utterance gen_utterance(const std::string &text, const SynthConfig &cfg,
                        uint64_t seed,
                        std::optional<ForcedEvent> forced = std::nullopt);

// Random lowercase prompt of n words, each 2..7 letters.
std::string random_text(std::mt19937_64 &rng, int min_words, int max_words);

// Write a corpus directory (manifest.jsonl, meta.json, frames/, truth/).
void gen_corpus(const std::vector<std::string> &texts, const SynthConfig &cfg,
                const std::string &out_dir);

// In-memory equivalent, for tests and the acceptance suite.
Corpus gen_corpus_mem(const std::vector<std::string> &texts,
                      const SynthConfig &cfg);

}  // namespace rtrack::synth

#endif  // RTRACK_SYNTH_HPP_
