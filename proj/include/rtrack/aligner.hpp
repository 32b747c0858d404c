// include/rtrack/aligner.hpp

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

#ifndef RTRACK_ALIGNER_HPP_
#define RTRACK_ALIGNER_HPP_

#include <string>
#include <vector>

#include "rtrack/io.hpp"
#include "rtrack/nn/rnn.hpp"

namespace rtrack::aligner {

// ---------------------------------------------------------------------------
// Attention encoder-decoder aligner. The decoder consumes the reference
// text under teacher forcing; its per-character attention rows are the
// soft alignment.

struct AedConfig {
  int vocab = kVocabSize;
  int feat_dim = 16;
  int embed_dim = 16;
  int enc_hidden = 24;
  int dec_hidden = 24;
  int attn_dim = 24;
  int enc_layers = 2;
  int pyramid_factor = 4;
  double learning_rate = 1.0;
  // Per-epoch multiplicative step-size decay; late epochs at the initial
  // rate oscillate instead of refining.
  double lr_decay = 0.97;
  double clip_norm = 5.0;
  int epochs = 50;
  double holdout_fraction = 0.1;
  // Guided attention: penalize mass far from the diagonal, decaying per
  // epoch. Plain CE discovers monotonic attention orders of magnitude too
  // slowly for desk-scale budgets.
  double guide_weight = 2.0;
  double guide_sigma = 0.1;
  double guide_decay = 0.97;
  uint64_t seed = 1;
};

struct AedModel {
  AedConfig cfg;
  nn::RecurrentEncoder encoder;  // bidirectional, pyramid
  nn::Param embed;               // (vocab+1) x embed_dim; last row is BOS
  nn::LstmCell decoder;
  nn::AdditiveAttention attn;
  nn::Param out_w;               // (dec_hidden + enc_width) x vocab
  nn::Param out_b;               // 1 x vocab

  explicit AedModel(const AedConfig &config);
  int enc_width() const { return encoder.output_dim(); }
  std::vector<nn::Param *> params();

  // Teacher-forced pass. Returns the mean next-char cross entropy and, if
  // requested, the per-character attention rows over encoder frames.
  // guide_weight > 0 adds the off-diagonal attention penalty to the loss.
  double forward(const Matrix &frames, const std::vector<int> &chars,
                 bool accumulate_grads,
                 std::vector<std::vector<double>> *attn_rows = nullptr,
                 int *correct_chars = nullptr, double guide_weight = 0.0) const;
};

// Trains by teacher-forced cross entropy; per-epoch held-out character
// accuracy goes to stderr and the weights with the best held-out accuracy
// are the ones returned. Warns (not fatal) when the loss fails to
// decrease over the first three epochs.
AedModel train_aed(const Corpus &corpus, const AedConfig &config);

// Soft T2S alignment (m x n at the original frame rate). Encoder
// downsampling is undone by spreading each attention weight uniformly
// over its input window.
AlignmentMatrix aed_align(const AedModel &model, const FrameMatrix &frames,
                          const CharSequence &chars);

// ---------------------------------------------------------------------------
// CTC forced alignment over blank-interleaved targets.

struct CtcLabelSequence {
  std::vector<int> states;  // [blank, c1, blank, ..., cm, blank]
  int blank = kVocabSize;

  static CtcLabelSequence from_chars(const std::vector<int> &chars,
                                     int blank_index = kVocabSize);
  int num_states() const { return static_cast<int>(states.size()); }
  bool is_blank(int s) const { return states[s] == blank; }
};

struct CtcTrellis {
  Matrix alpha;  // (2m+1) x n forward log probabilities
  double total_log_prob = 0.0;
};

// Forward recursion in log space over the blank-interleaved state graph.
CtcTrellis ctc_trellis(const Matrix &log_emissions,
                       const CtcLabelSequence &labels);

// Most probable state path (ties: stay, then advance by one, then by
// two; final-state ties to the lower index), reduced to a hard m x n
// matrix that assigns every non-blank frame to its character.
AlignmentMatrix ctc_backtrack(const CtcTrellis &trellis,
                              const Matrix &log_emissions,
                              const CtcLabelSequence &labels);
// The raw best state path, one state per frame.
std::vector<int> ctc_best_path(const Matrix &log_emissions,
                               const CtcLabelSequence &labels);

// ---------------------------------------------------------------------------
// Framewise-trained emission model feeding the CTC aligner.

struct EmitterConfig {
  int classes = kVocabSize + 1;  // chars + blank
  int feat_dim = 16;
  int hidden = 32;
  int layers = 1;
  double learning_rate = 0.05;
  double clip_norm = 5.0;
  int epochs = 6;
  double holdout_fraction = 0.1;
  uint64_t seed = 2;
};

struct EmitterModel {
  EmitterConfig cfg;
  nn::RecurrentEncoder encoder;  // forward, full frame rate
  nn::Param proj;                // hidden x classes
  nn::Param bias;                // 1 x classes

  explicit EmitterModel(const EmitterConfig &config);
  std::vector<nn::Param *> params();

  // Per-frame log-distributions over classes, n x classes.
  Matrix log_emissions(const Matrix &frames) const;
  double forward(const Matrix &frames, const std::vector<int> &frame_labels,
                 bool accumulate_grads, int *correct = nullptr) const;
};

// Ground-truth char-or-blank label per frame from the hard T2S truth.
std::vector<int> frame_char_labels(const AlignmentMatrix &truth_t2s,
                                   const CharSequence &chars,
                                   int blank_index = kVocabSize);

EmitterModel train_ctc_emitter(const Corpus &corpus,
                               const EmitterConfig &config);

// Emitter + trellis + backtrack in one call.
AlignmentMatrix ctc_align(const EmitterModel &model, const FrameMatrix &frames,
                          const CharSequence &chars);

}  // namespace rtrack::aligner

#endif  // RTRACK_ALIGNER_HPP_
