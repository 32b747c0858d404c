// include/rtrack/io.hpp

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

#ifndef RTRACK_IO_HPP_
#define RTRACK_IO_HPP_

#include <string>
#include <vector>

#include "rtrack/core.hpp"
#include "rtrack/nn/tape.hpp"

namespace rtrack {

// Frames blob: magic "RTRK", u32 n_frames, u32 dim, then 32-bit
// little-endian floats row-major.
void write_frames_blob(const std::string &path, const Matrix &frames);
Matrix read_frames_blob(const std::string &path);

// Model checkpoint: magic "RTNN", u16 format version, then per-param
// records (u16 name length, UTF-8 name, u8 rank, u32 dims, f64 LE values
// row-major). A JSON sidecar at <path>.json carries the model metadata.
void save_checkpoint(const std::string &path,
                     const std::vector<nn::Param *> &params,
                     const std::string &meta_json);
// Loads values into the given params, matching by name; every param must
// be present with the right shape.
void load_checkpoint(const std::string &path,
                     const std::vector<nn::Param *> &params);
std::string load_checkpoint_meta(const std::string &path);

// One synthetic utterance, fully materialized.
struct DisfluencyEvent {
  enum class Kind { Repeat, FalseStart, Skip };
  Kind kind = Kind::Repeat;
  int word_index = 0;
  std::string detail;
};

const char *to_string(DisfluencyEvent::Kind k);
DisfluencyEvent::Kind disfluency_kind_from_string(const std::string &s);

struct Utterance {
  std::string id;
  std::string text;
  CharSequence chars;
  FrameMatrix frames;
  AlignmentMatrix truth_t2s;          // Hard, m x n
  std::vector<int> frame_truth;       // per frame: word index, -1 = silence
  std::vector<DisfluencyEvent> events;
  uint64_t seed = 0;
};

using Corpus = std::vector<Utterance>;

// Ground-truth word index per frame from a hard T2S matrix (each column
// carries at most one active char). Space chars map to silence (-1).
std::vector<int> derive_frame_truth(const AlignmentMatrix &truth_t2s,
                                    const CharSequence &chars);

// Corpus directory layout: manifest.jsonl + meta.json + frames/<id>.rtrk
// + truth/<id>.tsv.
Corpus load_corpus(const std::string &dir);

// Ground truth at the tracker's emitted-frame rate: majority word per
// pyramid window among non-silence frames (ties to the lower index),
// silence when the window holds none.
std::vector<int> downsample_frame_truth(const std::vector<int> &frame_truth,
                                        int factor);

// Deterministic 90/10 train/held-out split by utterance-id hash.
void split_corpus(const Corpus &corpus, double holdout_fraction,
                  std::vector<const Utterance *> &train,
                  std::vector<const Utterance *> &heldout);

}  // namespace rtrack

#endif  // RTRACK_IO_HPP_
