// include/rtrack/tracker.hpp

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

#ifndef RTRACK_TRACKER_HPP_
#define RTRACK_TRACKER_HPP_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rtrack/io.hpp"
#include "rtrack/nn/rnn.hpp"

namespace rtrack::tracker {

enum class Signal { Hard, Soft, Combined };

Signal signal_from_string(const std::string &s);
const char *to_string(Signal s);

struct TrackerConfig {
  int vocab = kVocabSize;
  int feat_dim = 16;
  int embed_dim = 16;
  int text_hidden = 32;
  int text_layers = 2;
  int speech_hidden = 32;
  int speech_layers = 3;
  int pyramid_factor = 4;  // one pointer emission per 4 input frames
  int attn_dim = 32;
  double learning_rate = 0.2;
  double clip_norm = 5.0;
  int epochs = 10;
  double holdout_fraction = 0.1;
  double tau = 0.1;
  double w_hard = 1.0, w_soft = 1.0;
  uint64_t seed = 3;
};

// Pointer network: bidirectional character encoder, streaming speech
// encoder, additive attention head emitting one distribution over text
// characters per (downsampled) speech frame.
struct TrackerModel {
  TrackerConfig cfg;
  nn::Param embed;                 // vocab x embed_dim
  nn::RecurrentEncoder text_enc;   // bidirectional
  nn::RecurrentEncoder speech_enc; // forward with pyramid
  nn::AdditiveAttention attn;

  explicit TrackerModel(const TrackerConfig &config);
  std::vector<nn::Param *> params();
};

// Deterministic m x (2*text_hidden) text embedding matrix.
Matrix encode_text(const TrackerModel &model, const std::vector<int> &chars);

// One state per audio stream.
struct TrackerState {
  Matrix g;       // text encoding, fixed per utterance
  Matrix g_proj;  // g * W1, cached
  nn::EncoderState enc_state;
  long frames_consumed = 0;
};

TrackerState make_state(const TrackerModel &model,
                        const std::vector<int> &chars);

// Feed one frame; emits the pointer distribution a_j (1 x m) once per
// pyramid window.
std::optional<Matrix> tracker_step(const TrackerModel &model,
                                   TrackerState &state, const Matrix &frame);
// Flush the partial tail window, as the batch path zero-pads odd lengths.
std::vector<Matrix> tracker_flush(const TrackerModel &model,
                                  TrackerState &state);

// Full Â_S2T (T' x m) via the same per-frame path; bitwise equal to
// streaming row concatenation by construction.
Matrix track_batch(const TrackerModel &model, const std::vector<int> &chars,
                   const Matrix &frames);

// ---------------------------------------------------------------------------
// Losses. Predictions are row-stochastic (T' x m).

// Mean per-frame cross entropy; multi-hot target rows are renormalized to
// distributions first.
double loss_hard(const Matrix &pred, const Matrix &target);
// Mean per-frame KL(target || pred), with 0*log 0 = 0.
double loss_soft(const Matrix &pred, const Matrix &target);
double loss_combined(const Matrix &pred, const Matrix &hard_target,
                     const Matrix &soft_target, double w_hard, double w_soft);

// Aligner output at the full frame rate, converted to tracker
// supervision: transpose + row-normalize, then mean-pool over each
// pyramid window and renormalize.
Matrix pooled_supervision(const AlignmentMatrix &t2s, int pyramid_factor);

// ---------------------------------------------------------------------------
// Training and inference.

// Supervision is keyed by utterance id and given as full-rate T2S
// matrices; Hard/Soft/Combined selects which map(s) are required.
TrackerModel train_tracker(
    const Corpus &corpus,
    const std::map<std::string, AlignmentMatrix> &sup_hard_t2s,
    const std::map<std::string, AlignmentMatrix> &sup_soft_t2s, Signal signal,
    const TrackerConfig &config);

struct TrackRecord {
  double t = 0.0;  // seconds of audio consumed at emission
  int word = 0;    // argmax word index
  double score = 0.0;
  std::vector<std::pair<int, double>> dist_top5;  // (char, weight)
  std::vector<double> char_dist;                  // full a_j, unsharpened
};

// Streaming inference. Per emitted frame, sharpen a_j and sum the
// weights inside each word's character extent; argmax word wins.
std::vector<TrackRecord> track(const TrackerModel &model,
                               const CharSequence &chars,
                               const FrameMatrix &frames, double tau);

// Word scores for one distribution row; ties resolve to the lower index.
std::vector<double> word_scores(const std::vector<double> &char_dist,
                                const CharSequence &chars, double tau);

}  // namespace rtrack::tracker

#endif  // RTRACK_TRACKER_HPP_
