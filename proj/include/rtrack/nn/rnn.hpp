// include/rtrack/nn/rnn.hpp

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

#ifndef RTRACK_NN_RNN_HPP_
#define RTRACK_NN_RNN_HPP_

#include <optional>
#include <string>
#include <vector>

#include "rtrack/nn/tape.hpp"

namespace rtrack::nn {

enum class Direction { Forward, Bidirectional };

struct RecurrentEncoderConfig {
  int input_dim = 16;
  int hidden_dim = 32;
  int num_layers = 1;
  Direction direction = Direction::Forward;
  int pyramid_factor = 1;  // total downsampling, power of two
};

// Standard gated LSTM cell. Gate order in the packed 4h dimension:
// input, forget, cell candidate, output.
struct LstmCell {
  Param wx;  // in x 4h
  Param wh;  // h x 4h
  Param b;   // 1 x 4h
  int in = 0, hid = 0;

  LstmCell() = default;
  LstmCell(const std::string &name, int in_dim, int hid_dim,
           std::mt19937_64 &rng);

  // Plain step: (x 1xin, h 1xh, c 1xh) -> updates h, c in place.
  void step(const Matrix &x, Matrix &h, Matrix &c) const;

  // Tape step.
  std::pair<Tape::Var, Tape::Var> step_tape(Tape &t, Tape::Var x, Tape::Var h,
                                            Tape::Var c) const;

  void collect(std::vector<Param *> &out) {
    out.push_back(&wx);
    out.push_back(&wh);
    out.push_back(&b);
  }
};

// Streaming carry-state for a Forward encoder: per-layer (h, c) plus the
// pairing buffers of the pyramid stages.
struct EncoderState {
  std::vector<Matrix> h, c;
  std::vector<std::vector<Matrix>> pending;  // per layer, rows awaiting a pair
  long frames_consumed = 0;
};

// Stack of LSTM layers with optional pairwise-concat downsampling before
// each of the last log2(pyramid_factor) layers. Odd-length sequences are
// right-padded with a zero row before pairing.
struct RecurrentEncoder {
  RecurrentEncoderConfig cfg;
  std::vector<LstmCell> fwd;  // one per layer
  std::vector<LstmCell> bwd;  // empty when Forward

  RecurrentEncoder() = default;
  RecurrentEncoder(const std::string &name, RecurrentEncoderConfig config,
                   std::mt19937_64 &rng);

  int output_dim() const {
    return cfg.direction == Direction::Bidirectional ? 2 * cfg.hidden_dim
                                                     : cfg.hidden_dim;
  }
  int num_pyramid_layers() const;
  // True iff downsampling happens before layer `layer`.
  bool downsamples_before(int layer) const;
  static int output_length(int t, int pyramid_factor) {
    return (t + pyramid_factor - 1) / pyramid_factor;
  }

  // Whole-sequence forward, X is T x input_dim, result T' x output_dim.
  Matrix encode(const Matrix &x) const;

  // Tape forward over per-frame row vars; returns one var per output frame.
  std::vector<Tape::Var> encode_tape(Tape &t,
                                     const std::vector<Tape::Var> &x) const;

  // Streaming (Forward direction only). Returns the emitted output row,
  // if this frame completed a pyramid window.
  EncoderState make_state() const;
  std::optional<Matrix> step(EncoderState &state, const Matrix &frame) const;
  // Flush partial pyramid buffers (zero-padded), as the batch path does
  // for odd lengths. Returns any final emitted rows.
  std::vector<Matrix> finish(EncoderState &state) const;

  void collect(std::vector<Param *> &out) {
    for (auto &c : fwd) c.collect(out);
    for (auto &c : bwd) c.collect(out);
  }
};

// Additive attention: score_i = v^T tanh(W1 g_i + W2 h). W1 is stored as
// (g_dim x k) and W2 as (h_dim x k) for right multiplication; v is (k x 1).
struct AdditiveAttention {
  Param w1, w2, v;
  int k = 0;

  AdditiveAttention() = default;
  // init_scale widens the initial score range; softmax commits to a frame
  // faster when scores start with a few units of dynamic range.
  AdditiveAttention(const std::string &name, int g_dim, int h_dim, int attn_dim,
                    std::mt19937_64 &rng, double init_scale = 1.0);

  // Plain: returns the probability row a (1 x m). g_proj = G * w1 may be
  // precomputed once per utterance with project().
  Matrix project(const Matrix &g) const;  // m x k
  Matrix attend(const Matrix &g_proj, const Matrix &h) const;

  // Tape path: the caller registers w1/w2/v on the tape once per pass and
  // passes the vars in. attend_tape_log returns log a (1 x m);
  // exponentiate for the distribution.
  static Tape::Var project_tape(Tape &t, Tape::Var g, Tape::Var w1_var);
  static Tape::Var attend_tape_log(Tape &t, Tape::Var g_proj, Tape::Var h,
                                   Tape::Var w2_var, Tape::Var v_var);

  void collect(std::vector<Param *> &out) {
    out.push_back(&w1);
    out.push_back(&w2);
    out.push_back(&v);
  }
};

}  // namespace rtrack::nn

#endif  // RTRACK_NN_RNN_HPP_
