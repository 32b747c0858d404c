// src/tracker.cpp

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

#include "rtrack/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

#include "rtrack/core.hpp"
#include "rtrack/errors.hpp"

namespace rtrack::tracker {

Signal signal_from_string(const std::string &s) {
  if (s == "hard") return Signal::Hard;
  if (s == "soft") return Signal::Soft;
  if (s == "combined") return Signal::Combined;
  throw InvalidConfig("unknown training signal: " + s);
}

const char *to_string(Signal s) {
  switch (s) {
    case Signal::Hard: return "hard";
    case Signal::Soft: return "soft";
    case Signal::Combined: return "combined";
  }
  return "?";
}

TrackerModel::TrackerModel(const TrackerConfig &config) : cfg(config) {
  std::mt19937_64 rng(cfg.seed);
  embed = nn::Param("trk.embed", Matrix(cfg.vocab, cfg.embed_dim));
  nn::init_uniform(embed, cfg.embed_dim, rng);
  nn::RecurrentEncoderConfig tc;
  tc.input_dim = cfg.embed_dim;
  tc.hidden_dim = cfg.text_hidden;
  tc.num_layers = cfg.text_layers;
  tc.direction = nn::Direction::Bidirectional;
  tc.pyramid_factor = 1;
  text_enc = nn::RecurrentEncoder("trk.text", tc, rng);
  nn::RecurrentEncoderConfig sc;
  sc.input_dim = cfg.feat_dim;
  sc.hidden_dim = cfg.speech_hidden;
  sc.num_layers = cfg.speech_layers;
  sc.direction = nn::Direction::Forward;
  sc.pyramid_factor = cfg.pyramid_factor;
  speech_enc = nn::RecurrentEncoder("trk.speech", sc, rng);
  attn = nn::AdditiveAttention("trk.attn", text_enc.output_dim(),
                               speech_enc.output_dim(), cfg.attn_dim, rng);
}

std::vector<nn::Param *> TrackerModel::params() {
  std::vector<nn::Param *> out;
  out.push_back(&embed);
  text_enc.collect(out);
  speech_enc.collect(out);
  attn.collect(out);
  return out;
}

Matrix encode_text(const TrackerModel &model, const std::vector<int> &chars) {
  if (chars.empty()) throw InvalidInput("empty text");
  Matrix x(static_cast<int>(chars.size()), model.cfg.embed_dim);
  for (size_t i = 0; i < chars.size(); ++i) {
    if (chars[i] < 0 || chars[i] >= model.cfg.vocab)
      throw InvalidInput("character index out of range");
    for (int j = 0; j < model.cfg.embed_dim; ++j)
      x.at(static_cast<int>(i), j) = model.embed.value.at(chars[i], j);
  }
  return model.text_enc.encode(x);
}

TrackerState make_state(const TrackerModel &model,
                        const std::vector<int> &chars) {
  TrackerState s;
  s.g = encode_text(model, chars);
  s.g_proj = model.attn.project(s.g);
  s.enc_state = model.speech_enc.make_state();
  return s;
}

std::optional<Matrix> tracker_step(const TrackerModel &model,
                                   TrackerState &state, const Matrix &frame) {
  std::optional<Matrix> h = model.speech_enc.step(state.enc_state, frame);
  ++state.frames_consumed;
  if (!h) return std::nullopt;
  return model.attn.attend(state.g_proj, *h);
}

std::vector<Matrix> tracker_flush(const TrackerModel &model,
                                  TrackerState &state) {
  std::vector<Matrix> out;
  for (const Matrix &h : model.speech_enc.finish(state.enc_state))
    out.push_back(model.attn.attend(state.g_proj, h));
  return out;
}

Matrix track_batch(const TrackerModel &model, const std::vector<int> &chars,
                   const Matrix &frames) {
  if (frames.rows < 1) throw InvalidInput("no frames");
  TrackerState state = make_state(model, chars);
  std::vector<Matrix> rows;
  for (int i = 0; i < frames.rows; ++i) {
    auto a = tracker_step(model, state, frames.row(i));
    if (a) rows.push_back(std::move(*a));
  }
  for (Matrix &a : tracker_flush(model, state)) rows.push_back(std::move(a));
  Matrix out(static_cast<int>(rows.size()), static_cast<int>(chars.size()));
  for (size_t r = 0; r < rows.size(); ++r) out.set_row(static_cast<int>(r), rows[r]);
  return out;
}

// ---------------------------------------------------------------------------
// Losses

double loss_hard(const Matrix &pred, const Matrix &target) {
  if (!pred.same_shape(target)) throw ShapeError("loss_hard shape mismatch");
  Matrix tgt = l1_normalize_rows(target);
  double total = 0.0;
  for (int r = 0; r < pred.rows; ++r) {
    double ce = 0.0;
    for (int c = 0; c < pred.cols; ++c) {
      double tv = tgt.at(r, c);
      if (tv == 0.0) continue;
      double pv = pred.at(r, c);
      ce -= tv * (pv > 0.0 ? std::log(pv)
                           : -std::numeric_limits<double>::infinity());
    }
    total += ce;
  }
  return total / pred.rows;
}

double loss_soft(const Matrix &pred, const Matrix &target) {
  if (!pred.same_shape(target)) throw ShapeError("loss_soft shape mismatch");
  double total = 0.0;
  for (int r = 0; r < pred.rows; ++r) {
    double kl = 0.0;
    for (int c = 0; c < pred.cols; ++c) {
      double tv = target.at(r, c);
      if (tv == 0.0) continue;
      double pv = pred.at(r, c);
      kl += tv * (std::log(tv) -
                  (pv > 0.0 ? std::log(pv)
                            : -std::numeric_limits<double>::infinity()));
    }
    total += kl;
  }
  return total / pred.rows;
}

double loss_combined(const Matrix &pred, const Matrix &hard_target,
                     const Matrix &soft_target, double w_hard, double w_soft) {
  if (w_hard < 0.0 || w_soft < 0.0)
    throw InvalidConfig("loss weights must be nonnegative");
  return w_hard * loss_hard(pred, hard_target) +
         w_soft * loss_soft(pred, soft_target);
}

Matrix pooled_supervision(const AlignmentMatrix &t2s, int pyramid_factor) {
  AlignmentMatrix s2t = to_supervision(t2s);
  const Matrix &full = s2t.values;  // n x m, row-stochastic
  int t_out = nn::RecurrentEncoder::output_length(full.rows, pyramid_factor);
  Matrix pooled(t_out, full.cols);
  for (int w = 0; w < t_out; ++w) {
    int lo = w * pyramid_factor, hi = std::min((w + 1) * pyramid_factor, full.rows);
    for (int c = 0; c < full.cols; ++c) {
      double s = 0.0;
      for (int r = lo; r < hi; ++r) s += full.at(r, c);
      pooled.at(w, c) = s / (hi - lo);
    }
  }
  return l1_normalize_rows(pooled);
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct TapeLoss {
  nn::Tape::Var loss;
  double kl_const = 0.0;  // sum of t*log t terms, outside the tape
};

// Tape forward over one utterance; the per-row loss is CE against the
// pooled target (plus the target-entropy constant for KL signals).
TapeLoss utterance_loss(nn::Tape &t, TrackerModel &model,
                        const std::vector<int> &chars, const Matrix &frames,
                        const Matrix *hard_tgt, const Matrix *soft_tgt,
                        double w_hard, double w_soft) {
  // Text encoder.
  nn::Tape::Var embed_v = t.param(model.embed);
  std::vector<nn::Tape::Var> char_rows;
  for (int c : chars) char_rows.push_back(t.select_row(embed_v, c));
  std::vector<nn::Tape::Var> g_rows = model.text_enc.encode_tape(t, char_rows);
  nn::Tape::Var g = t.concat_rows(g_rows);
  nn::Tape::Var w1v = t.param(model.attn.w1);
  nn::Tape::Var w2v = t.param(model.attn.w2);
  nn::Tape::Var vv = t.param(model.attn.v);
  nn::Tape::Var g_proj = nn::AdditiveAttention::project_tape(t, g, w1v);
  // Speech encoder.
  std::vector<nn::Tape::Var> xs;
  for (int i = 0; i < frames.rows; ++i) xs.push_back(t.constant(frames.row(i)));
  std::vector<nn::Tape::Var> hs = model.speech_enc.encode_tape(t, xs);

  const int t_out = static_cast<int>(hs.size());
  nn::Tape::Var loss_sum = t.constant(Matrix(1, 1));
  double kl_const = 0.0;
  for (int j = 0; j < t_out; ++j) {
    nn::Tape::Var logp =
        nn::AdditiveAttention::attend_tape_log(t, g_proj, hs[j], w2v, vv);
    if (hard_tgt) {
      nn::Tape::Var li =
          t.scale(t.sum(t.mul_const(logp, hard_tgt->row(j))), -w_hard);
      loss_sum = t.add(loss_sum, li);
    }
    if (soft_tgt) {
      nn::Tape::Var li =
          t.scale(t.sum(t.mul_const(logp, soft_tgt->row(j))), -w_soft);
      loss_sum = t.add(loss_sum, li);
      for (int c = 0; c < soft_tgt->cols; ++c) {
        double tv = soft_tgt->at(j, c);
        if (tv > 0.0) kl_const += w_soft * tv * std::log(tv);
      }
    }
  }
  TapeLoss out;
  out.loss = t.scale(loss_sum, 1.0 / t_out);
  out.kl_const = kl_const / t_out;
  return out;
}

double heldout_frame_accuracy(const TrackerModel &model,
                              const std::vector<const Utterance *> &utts,
                              double tau) {
  long correct = 0, scored = 0;
  for (const Utterance *u : utts) {
    std::vector<TrackRecord> recs = track(model, u->chars, u->frames, tau);
    std::vector<int> truth =
        downsample_frame_truth(u->frame_truth, model.cfg.pyramid_factor);
    for (size_t i = 0; i < recs.size() && i < truth.size(); ++i) {
      if (truth[i] < 0) continue;
      ++scored;
      if (recs[i].word == truth[i]) ++correct;
    }
  }
  return scored ? static_cast<double>(correct) / scored : 0.0;
}

}  // namespace

TrackerModel train_tracker(
    const Corpus &corpus,
    const std::map<std::string, AlignmentMatrix> &sup_hard_t2s,
    const std::map<std::string, AlignmentMatrix> &sup_soft_t2s, Signal signal,
    const TrackerConfig &config) {
  if (corpus.empty()) throw InvalidCorpus("empty corpus");
  const bool need_hard = signal != Signal::Soft;
  const bool need_soft = signal != Signal::Hard;

  // Validate and pool supervision up front; errors must name the utterance.
  std::map<std::string, Matrix> hard_pooled, soft_pooled;
  for (const Utterance &u : corpus) {
    int t_out = nn::RecurrentEncoder::output_length(u.frames.n(),
                                                    config.pyramid_factor);
    auto prepare = [&](const std::map<std::string, AlignmentMatrix> &sup,
                       std::map<std::string, Matrix> &dst, const char *what) {
      auto it = sup.find(u.id);
      if (it == sup.end())
        throw SupervisionShapeError("utterance " + u.id + " missing " + what +
                                    " supervision");
      if (it->second.text_tokens() != u.chars.size() ||
          it->second.speech_frames() != u.frames.n())
        throw SupervisionShapeError(
            "utterance " + u.id + ": " + what + " supervision shape " +
            std::to_string(it->second.text_tokens()) + "x" +
            std::to_string(it->second.speech_frames()) + " does not match " +
            std::to_string(u.chars.size()) + " chars x " +
            std::to_string(u.frames.n()) + " frames");
      Matrix pooled = pooled_supervision(it->second, config.pyramid_factor);
      if (pooled.rows != t_out)
        throw SupervisionShapeError("utterance " + u.id +
                                    ": pooled supervision row count mismatch");
      dst.emplace(u.id, std::move(pooled));
    };
    if (need_hard) prepare(sup_hard_t2s, hard_pooled, "hard");
    if (need_soft) prepare(sup_soft_t2s, soft_pooled, "soft");
  }

  TrackerModel model(config);
  std::vector<nn::Param *> params = model.params();
  std::vector<const Utterance *> train, heldout;
  split_corpus(corpus, config.holdout_fraction, train, heldout);
  if (train.empty()) train = {heldout.begin(), heldout.end()};

  double best_acc = -1.0;
  std::vector<Matrix> best_values;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::mt19937_64 shuffle_rng(config.seed + 3000 + epoch);
    std::shuffle(train.begin(), train.end(), shuffle_rng);
    double loss_acc = 0.0;
    for (const Utterance *u : train) {
      nn::Tape t;
      const Matrix *ht = need_hard ? &hard_pooled.at(u->id) : nullptr;
      const Matrix *st = need_soft ? &soft_pooled.at(u->id) : nullptr;
      TapeLoss tl = utterance_loss(t, model, u->chars.chars, u->frames.frames,
                                   ht, st, config.w_hard, config.w_soft);
      t.backward(tl.loss);
      loss_acc += t.scalar(tl.loss) + tl.kl_const;
      nn::sgd_step(params, config.learning_rate, config.clip_norm);
    }
    double acc = heldout_frame_accuracy(
        model, heldout.empty() ? train : heldout, config.tau);
    std::cerr << "[tracker:" << to_string(signal) << "] epoch " << epoch + 1
              << " train_loss " << loss_acc / train.size()
              << " heldout_frame_acc " << acc << '\n';
    if (acc > best_acc) {
      best_acc = acc;
      best_values.clear();
      for (nn::Param *p : params) best_values.push_back(p->value);
    }
  }
  for (size_t i = 0; i < params.size(); ++i) params[i]->value = best_values[i];
  return model;
}

// ---------------------------------------------------------------------------
// Inference

std::vector<double> word_scores(const std::vector<double> &char_dist,
                                const CharSequence &chars, double tau) {
  std::vector<double> sharp = sharpen(char_dist, tau);
  std::vector<double> scores(chars.word_count(), 0.0);
  for (int w = 0; w < chars.word_count(); ++w)
    for (int c = chars.word_extents[w].first; c < chars.word_extents[w].second;
         ++c)
      scores[w] += sharp[c];
  return scores;
}

std::vector<TrackRecord> track(const TrackerModel &model,
                               const CharSequence &chars,
                               const FrameMatrix &frames, double tau) {
  if (frames.n() < 1) throw InvalidInput("empty utterance");
  TrackerState state = make_state(model, chars.chars);
  std::vector<TrackRecord> records;
  auto emit = [&](const Matrix &a, long frames_seen) {
    TrackRecord rec;
    rec.t = frames_seen * frames.frame_duration_s;
    rec.char_dist.assign(a.data.begin(), a.data.end());
    std::vector<double> scores = word_scores(rec.char_dist, chars, tau);
    rec.word = 0;
    for (int w = 1; w < static_cast<int>(scores.size()); ++w)
      if (scores[w] > scores[rec.word]) rec.word = w;
    rec.score = scores[rec.word];
    std::vector<int> order(rec.char_dist.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
      return rec.char_dist[x] > rec.char_dist[y];
    });
    for (size_t i = 0; i < order.size() && i < 5; ++i)
      rec.dist_top5.emplace_back(order[i], rec.char_dist[order[i]]);
    records.push_back(std::move(rec));
  };
  for (int i = 0; i < frames.n(); ++i) {
    auto a = tracker_step(model, state, frames.frames.row(i));
    if (a) emit(*a, state.frames_consumed);
  }
  for (const Matrix &a : tracker_flush(model, state))
    emit(a, state.frames_consumed);
  return records;
}

}  // namespace rtrack::tracker
