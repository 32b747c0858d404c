// src/aligner.cpp

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

#include "rtrack/aligner.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

#include "rtrack/errors.hpp"

namespace rtrack::aligner {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Matrix one_hot_row(int index, int width) {
  Matrix m(1, width);
  m.at(0, index) = 1.0;
  return m;
}

int argmax_row(const Matrix &m) {
  int best = 0;
  for (int j = 1; j < m.cols; ++j)
    if (m.at(0, j) > m.at(0, best)) best = j;
  return best;
}

}  // namespace

// ---------------------------------------------------------------------------
// AED

AedModel::AedModel(const AedConfig &config) : cfg(config) {
  std::mt19937_64 rng(cfg.seed);
  nn::RecurrentEncoderConfig ec;
  ec.input_dim = cfg.feat_dim;
  ec.hidden_dim = cfg.enc_hidden;
  ec.num_layers = cfg.enc_layers;
  ec.direction = nn::Direction::Bidirectional;
  ec.pyramid_factor = cfg.pyramid_factor;
  encoder = nn::RecurrentEncoder("aed.enc", ec, rng);
  embed = nn::Param("aed.embed", Matrix(cfg.vocab + 1, cfg.embed_dim));
  nn::init_uniform(embed, cfg.embed_dim, rng);
  decoder = nn::LstmCell("aed.dec", cfg.embed_dim + enc_width(), cfg.dec_hidden,
                         rng);
  attn = nn::AdditiveAttention("aed.attn", enc_width(), cfg.dec_hidden,
                               cfg.attn_dim, rng);
  out_w = nn::Param("aed.out_w", Matrix(cfg.dec_hidden + enc_width(), cfg.vocab));
  nn::init_uniform(out_w, cfg.dec_hidden + enc_width(), rng);
  out_b = nn::Param("aed.out_b", Matrix(1, cfg.vocab));
}

std::vector<nn::Param *> AedModel::params() {
  std::vector<nn::Param *> out;
  encoder.collect(out);
  out.push_back(&embed);
  decoder.collect(out);
  attn.collect(out);
  out.push_back(&out_w);
  out.push_back(&out_b);
  return out;
}

double AedModel::forward(const Matrix &frames, const std::vector<int> &chars,
                         bool accumulate_grads,
                         std::vector<std::vector<double>> *attn_rows,
                         int *correct_chars, double guide_weight) const {
  if (chars.empty()) throw InvalidInput("empty character sequence");
  auto *self = const_cast<AedModel *>(this);
  nn::Tape t;
  std::vector<nn::Tape::Var> xs;
  xs.reserve(frames.rows);
  for (int i = 0; i < frames.rows; ++i) xs.push_back(t.constant(frames.row(i)));
  std::vector<nn::Tape::Var> enc = encoder.encode_tape(t, xs);
  nn::Tape::Var enc_mat = t.concat_rows(enc);
  nn::Tape::Var w1v = t.param(self->attn.w1);
  nn::Tape::Var w2v = t.param(self->attn.w2);
  nn::Tape::Var vv = t.param(self->attn.v);
  nn::Tape::Var g_proj = nn::AdditiveAttention::project_tape(t, enc_mat, w1v);
  nn::Tape::Var embed_v = t.param(self->embed);
  nn::Tape::Var out_wv = t.param(self->out_w);
  nn::Tape::Var out_bv = t.param(self->out_b);

  nn::Tape::Var h = t.constant(Matrix(1, cfg.dec_hidden));
  nn::Tape::Var c = t.constant(Matrix(1, cfg.dec_hidden));
  nn::Tape::Var ctx = t.constant(Matrix(1, enc_width()));
  nn::Tape::Var loss_sum = t.constant(Matrix(1, 1));
  int correct = 0;
  const int m = static_cast<int>(chars.size());
  if (attn_rows) attn_rows->clear();
  for (int i = 0; i < m; ++i) {
    int prev = i == 0 ? cfg.vocab : chars[i - 1];  // last embed row is BOS
    nn::Tape::Var x = t.concat_cols(t.select_row(embed_v, prev), ctx);
    auto [hn, cn] = decoder.step_tape(t, x, h, c);
    h = hn;
    c = cn;
    nn::Tape::Var log_a =
        nn::AdditiveAttention::attend_tape_log(t, g_proj, h, w2v, vv);
    nn::Tape::Var a = t.exp_op(log_a);
    ctx = t.matmul(a, enc_mat);
    nn::Tape::Var logits =
        t.add(t.matmul(t.concat_cols(h, ctx), out_wv), out_bv);
    nn::Tape::Var logp = t.log_softmax_row(logits);
    nn::Tape::Var li =
        t.scale(t.sum(t.mul_const(logp, one_hot_row(chars[i], cfg.vocab))), -1.0);
    loss_sum = t.add(loss_sum, li);
    if (guide_weight > 0.0) {
      // Off-diagonal penalty: w_ie = 1 - exp(-(i/m - e/E)^2 / (2 sigma^2)).
      const int e_n = static_cast<int>(enc.size());
      Matrix guide(1, e_n);
      const double s2 = 2.0 * cfg.guide_sigma * cfg.guide_sigma;
      const double pi = m > 1 ? static_cast<double>(i) / (m - 1) : 0.0;
      for (int e = 0; e < e_n; ++e) {
        double pe = e_n > 1 ? static_cast<double>(e) / (e_n - 1) : 0.0;
        guide.at(0, e) = 1.0 - std::exp(-(pi - pe) * (pi - pe) / s2);
      }
      loss_sum = t.add(
          loss_sum, t.scale(t.sum(t.mul_const(a, std::move(guide))), guide_weight));
    }
    if (attn_rows) {
      const Matrix &av = t.value(a);
      attn_rows->emplace_back(av.data.begin(), av.data.end());
    }
    if (correct_chars && argmax_row(t.value(logits)) == chars[i]) ++correct;
  }
  nn::Tape::Var loss = t.scale(loss_sum, 1.0 / m);
  if (accumulate_grads) t.backward(loss);
  if (correct_chars) *correct_chars = correct;
  return t.scalar(loss);
}

namespace {

void check_corpus_for_training(const Corpus &corpus, int min_frames_ratio = 4) {
  if (corpus.empty()) throw InvalidCorpus("empty corpus");
  for (const Utterance &u : corpus) {
    if (u.chars.size() < 1) throw InvalidCorpus("utterance " + u.id + " has no text");
    if (u.frames.n() * min_frames_ratio < u.chars.size())
      throw InvalidCorpus("utterance " + u.id + " has too few frames");
  }
}

}  // namespace

AedModel train_aed(const Corpus &corpus, const AedConfig &config) {
  check_corpus_for_training(corpus);
  AedModel model(config);
  std::vector<nn::Param *> params = model.params();
  std::vector<const Utterance *> train, heldout;
  split_corpus(corpus, config.holdout_fraction, train, heldout);
  if (train.empty()) train = {heldout.begin(), heldout.end()};
  std::vector<double> epoch_losses;
  double best_acc = -1.0;
  std::vector<Matrix> best_params;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::mt19937_64 shuffle_rng(config.seed + 1000 + epoch);
    std::shuffle(train.begin(), train.end(), shuffle_rng);
    double loss_sum = 0.0;
    const double gw =
        config.guide_weight * std::pow(config.guide_decay, epoch);
    const double lr =
        config.learning_rate * std::pow(config.lr_decay, epoch);
    for (const Utterance *u : train) {
      loss_sum += model.forward(u->frames.frames, u->chars.chars, true,
                                nullptr, nullptr, gw);
      nn::sgd_step(params, lr, config.clip_norm);
    }
    double mean_loss = loss_sum / train.size();
    epoch_losses.push_back(mean_loss);
    long correct = 0, total = 0;
    for (const Utterance *u : heldout) {
      int c = 0;
      model.forward(u->frames.frames, u->chars.chars, false, nullptr, &c);
      correct += c;
      total += u->chars.size();
    }
    std::cerr << "[aed] epoch " << epoch + 1 << " train_loss " << mean_loss;
    if (total) {
      double acc = static_cast<double>(correct) / total;
      std::cerr << " heldout_char_acc " << acc;
      // Late-epoch SGD noise can degrade the final weights; keep the best.
      if (acc > best_acc) {
        best_acc = acc;
        best_params.clear();
        for (const nn::Param *p : params) best_params.push_back(p->value);
      }
    }
    std::cerr << '\n';
    if (epoch == 2 && epoch_losses[2] >= epoch_losses[0])
      std::cerr << "[aed] warning: TrainingDiverged: loss not decreasing over "
                   "first 3 epochs\n";
  }
  if (!best_params.empty())
    for (size_t i = 0; i < params.size(); ++i)
      params[i]->value = std::move(best_params[i]);
  return model;
}

AlignmentMatrix aed_align(const AedModel &model, const FrameMatrix &frames,
                          const CharSequence &chars) {
  const int n = frames.n();
  const int f = model.cfg.pyramid_factor;
  if (n < f) throw InputTooShort("need at least one encoder window of frames");
  std::vector<std::vector<double>> attn_rows;
  model.forward(frames.frames, chars.chars, false, &attn_rows);
  const int m = chars.size();
  const int e = nn::RecurrentEncoder::output_length(n, f);
  AlignmentMatrix out;
  out.orientation = Orientation::TextToSpeech;
  out.kind = AlignKind::Soft;
  out.values = Matrix(m, n);
  for (int i = 0; i < m; ++i) {
    if (static_cast<int>(attn_rows[i].size()) != e)
      throw ShapeError("attention row length mismatch");
    for (int k = 0; k < e; ++k) {
      int lo = k * f, hi = std::min((k + 1) * f, n);
      double w = attn_rows[i][k] / (hi - lo);
      for (int t = lo; t < hi; ++t) out.values.at(i, t) = w;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// CTC

CtcLabelSequence CtcLabelSequence::from_chars(const std::vector<int> &chars,
                                              int blank_index) {
  CtcLabelSequence seq;
  seq.blank = blank_index;
  seq.states.push_back(blank_index);
  for (int c : chars) {
    seq.states.push_back(c);
    seq.states.push_back(blank_index);
  }
  return seq;
}

CtcTrellis ctc_trellis(const Matrix &log_emissions,
                       const CtcLabelSequence &labels) {
  const int s_count = labels.num_states();
  const int n = log_emissions.rows;
  const int m = (s_count - 1) / 2;
  if (n < m) throw InfeasibleAlignment("fewer frames than target characters");
  for (int s = 0; s < s_count; ++s)
    if (labels.states[s] < 0 || labels.states[s] >= log_emissions.cols)
      throw ShapeError("label index outside emission alphabet");

  CtcTrellis tr;
  tr.alpha = Matrix(s_count, n, kNegInf);
  tr.alpha.at(0, 0) = log_emissions.at(0, labels.states[0]);
  if (s_count > 1) tr.alpha.at(1, 0) = log_emissions.at(0, labels.states[1]);
  for (int t = 1; t < n; ++t) {
    for (int s = 0; s < s_count; ++s) {
      double acc[3];
      int k = 0;
      acc[k++] = tr.alpha.at(s, t - 1);
      if (s >= 1) acc[k++] = tr.alpha.at(s - 1, t - 1);
      if (s >= 2 && !labels.is_blank(s) &&
          labels.states[s] != labels.states[s - 2])
        acc[k++] = tr.alpha.at(s - 2, t - 1);
      double lse = logsumexp(acc, k);
      tr.alpha.at(s, t) =
          lse == kNegInf ? kNegInf : lse + log_emissions.at(t, labels.states[s]);
    }
  }
  double finals[2] = {tr.alpha.at(s_count - 1, n - 1),
                      s_count > 1 ? tr.alpha.at(s_count - 2, n - 1) : kNegInf};
  tr.total_log_prob = logsumexp(finals, 2);
  return tr;
}

std::vector<int> ctc_best_path(const Matrix &log_emissions,
                               const CtcLabelSequence &labels) {
  const int s_count = labels.num_states();
  const int n = log_emissions.rows;
  Matrix beta(s_count, n, kNegInf);
  std::vector<std::vector<int>> bp(s_count, std::vector<int>(n, -1));
  beta.at(0, 0) = log_emissions.at(0, labels.states[0]);
  if (s_count > 1) beta.at(1, 0) = log_emissions.at(0, labels.states[1]);
  for (int t = 1; t < n; ++t) {
    for (int s = 0; s < s_count; ++s) {
      // Scan order implements the tie rule: stay, advance-1, advance-2.
      int preds[3];
      int k = 0;
      preds[k++] = s;
      if (s >= 1) preds[k++] = s - 1;
      if (s >= 2 && !labels.is_blank(s) &&
          labels.states[s] != labels.states[s - 2])
        preds[k++] = s - 2;
      double best = kNegInf;
      int best_p = -1;
      for (int i = 0; i < k; ++i) {
        double v = beta.at(preds[i], t - 1);
        if (v > best) {
          best = v;
          best_p = preds[i];
        }
      }
      if (best_p >= 0 && best != kNegInf) {
        beta.at(s, t) = best + log_emissions.at(t, labels.states[s]);
        bp[s][t] = best_p;
      }
    }
  }
  // Final-state ties resolve to the lower index (the last character).
  int final_s;
  if (s_count > 1) {
    final_s = s_count - 2;
    if (beta.at(s_count - 1, n - 1) > beta.at(s_count - 2, n - 1))
      final_s = s_count - 1;
  } else {
    final_s = 0;
  }
  if (beta.at(final_s, n - 1) == kNegInf)
    throw InfeasibleAlignment("no valid CTC path");
  std::vector<int> path(n);
  int s = final_s;
  for (int t = n - 1; t >= 0; --t) {
    path[t] = s;
    if (t > 0) s = bp[s][t];
  }
  return path;
}

AlignmentMatrix ctc_backtrack(const CtcTrellis &trellis,
                              const Matrix &log_emissions,
                              const CtcLabelSequence &labels) {
  if (trellis.alpha.rows != labels.num_states() ||
      trellis.alpha.cols != log_emissions.rows)
    throw ShapeError("trellis does not match emissions/labels");
  std::vector<int> path = ctc_best_path(log_emissions, labels);
  const int n = log_emissions.rows;
  const int m = (labels.num_states() - 1) / 2;
  AlignmentMatrix out;
  out.orientation = Orientation::TextToSpeech;
  out.kind = AlignKind::Hard;
  out.values = Matrix(m, n);
  for (int t = 0; t < n; ++t)
    if (path[t] % 2 == 1) out.values.at((path[t] - 1) / 2, t) = 1.0;
  return out;
}

// ---------------------------------------------------------------------------
// Emitter

EmitterModel::EmitterModel(const EmitterConfig &config) : cfg(config) {
  std::mt19937_64 rng(cfg.seed);
  nn::RecurrentEncoderConfig ec;
  ec.input_dim = cfg.feat_dim;
  ec.hidden_dim = cfg.hidden;
  ec.num_layers = cfg.layers;
  ec.direction = nn::Direction::Forward;
  ec.pyramid_factor = 1;
  encoder = nn::RecurrentEncoder("emit.enc", ec, rng);
  proj = nn::Param("emit.proj", Matrix(cfg.hidden, cfg.classes));
  nn::init_uniform(proj, cfg.hidden, rng);
  bias = nn::Param("emit.bias", Matrix(1, cfg.classes));
}

std::vector<nn::Param *> EmitterModel::params() {
  std::vector<nn::Param *> out;
  encoder.collect(out);
  out.push_back(&proj);
  out.push_back(&bias);
  return out;
}

Matrix EmitterModel::log_emissions(const Matrix &frames) const {
  Matrix h = encoder.encode(frames);
  Matrix logits = matmul(h, proj.value);
  Matrix out(logits.rows, logits.cols);
  for (int t = 0; t < logits.rows; ++t) {
    for (int j = 0; j < logits.cols; ++j)
      logits.at(t, j) += bias.value.at(0, j);
    double lse = logsumexp(logits.row_ptr(t), logits.cols);
    for (int j = 0; j < logits.cols; ++j)
      out.at(t, j) = logits.at(t, j) - lse;
  }
  return out;
}

double EmitterModel::forward(const Matrix &frames,
                             const std::vector<int> &frame_labels,
                             bool accumulate_grads, int *correct) const {
  if (static_cast<int>(frame_labels.size()) != frames.rows)
    throw ShapeError("frame label count mismatch");
  auto *self = const_cast<EmitterModel *>(this);
  nn::Tape t;
  std::vector<nn::Tape::Var> xs;
  for (int i = 0; i < frames.rows; ++i) xs.push_back(t.constant(frames.row(i)));
  std::vector<nn::Tape::Var> hs = encoder.encode_tape(t, xs);
  nn::Tape::Var projv = t.param(self->proj);
  nn::Tape::Var biasv = t.param(self->bias);
  nn::Tape::Var loss_sum = t.constant(Matrix(1, 1));
  int ok = 0;
  for (size_t i = 0; i < hs.size(); ++i) {
    nn::Tape::Var logits = t.add(t.matmul(hs[i], projv), biasv);
    nn::Tape::Var logp = t.log_softmax_row(logits);
    nn::Tape::Var li = t.scale(
        t.sum(t.mul_const(logp, one_hot_row(frame_labels[i], cfg.classes))),
        -1.0);
    loss_sum = t.add(loss_sum, li);
    if (correct && argmax_row(t.value(logits)) == frame_labels[i]) ++ok;
  }
  nn::Tape::Var loss = t.scale(loss_sum, 1.0 / static_cast<double>(hs.size()));
  if (accumulate_grads) t.backward(loss);
  if (correct) *correct = ok;
  return t.scalar(loss);
}

std::vector<int> frame_char_labels(const AlignmentMatrix &truth_t2s,
                                   const CharSequence &chars,
                                   int blank_index) {
  if (truth_t2s.orientation != Orientation::TextToSpeech)
    throw OrientationError("frame labels need a T2S matrix");
  const Matrix &m = truth_t2s.values;
  std::vector<int> out(m.cols, blank_index);
  for (int t = 0; t < m.cols; ++t)
    for (int i = 0; i < m.rows; ++i)
      if (m.at(i, t) != 0.0) {
        out[t] = chars.chars[i];
        break;
      }
  return out;
}

EmitterModel train_ctc_emitter(const Corpus &corpus,
                               const EmitterConfig &config) {
  check_corpus_for_training(corpus, 1);
  EmitterModel model(config);
  std::vector<nn::Param *> params = model.params();
  std::vector<const Utterance *> train, heldout;
  split_corpus(corpus, config.holdout_fraction, train, heldout);
  if (train.empty()) train = {heldout.begin(), heldout.end()};

  auto labels_for = [&](const Utterance &u) {
    return frame_char_labels(u.truth_t2s, u.chars, config.classes - 1);
  };

  std::vector<double> epoch_losses;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::mt19937_64 shuffle_rng(config.seed + 2000 + epoch);
    std::shuffle(train.begin(), train.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (const Utterance *u : train) {
      loss_sum += model.forward(u->frames.frames, labels_for(*u), true);
      nn::sgd_step(params, config.learning_rate, config.clip_norm);
    }
    double mean_loss = loss_sum / train.size();
    epoch_losses.push_back(mean_loss);
    long correct = 0, total = 0;
    for (const Utterance *u : heldout) {
      int c = 0;
      model.forward(u->frames.frames, labels_for(*u), false, &c);
      correct += c;
      total += u->frames.n();
    }
    std::cerr << "[emit] epoch " << epoch + 1 << " train_loss " << mean_loss;
    if (total) std::cerr << " heldout_frame_acc " << static_cast<double>(correct) / total;
    std::cerr << '\n';
    if (epoch == 2 && epoch_losses[2] >= epoch_losses[0])
      std::cerr << "[emit] warning: TrainingDiverged: loss not decreasing over "
                   "first 3 epochs\n";
  }
  return model;
}

AlignmentMatrix ctc_align(const EmitterModel &model, const FrameMatrix &frames,
                          const CharSequence &chars) {
  Matrix em = model.log_emissions(frames.frames);
  CtcLabelSequence labels = CtcLabelSequence::from_chars(chars.chars);
  CtcTrellis tr = ctc_trellis(em, labels);
  return ctc_backtrack(tr, em, labels);
}

}  // namespace rtrack::aligner
