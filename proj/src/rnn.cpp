// src/rnn.cpp

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

#include "rtrack/nn/rnn.hpp"

#include <cmath>

#include "rtrack/errors.hpp"

namespace rtrack::nn {

LstmCell::LstmCell(const std::string &name, int in_dim, int hid_dim,
                   std::mt19937_64 &rng)
    : wx(name + ".wx", Matrix(in_dim, 4 * hid_dim)),
      wh(name + ".wh", Matrix(hid_dim, 4 * hid_dim)),
      b(name + ".b", Matrix(1, 4 * hid_dim)),
      in(in_dim),
      hid(hid_dim) {
  init_uniform(wx, in_dim, rng);
  init_uniform(wh, hid_dim, rng);
  // Forget-gate bias starts at 1 so memory survives early training; the
  // other gate biases start at zero.
  for (int j = 0; j < hid_dim; ++j) b.value.at(0, hid_dim + j) = 1.0;
}

void LstmCell::step(const Matrix &x, Matrix &h, Matrix &c) const {
  if (x.cols != in || h.cols != hid || c.cols != hid)
    throw ShapeError("LstmCell::step dimension mismatch");
  Matrix z = b.value;
  // z = x*wx + h*wh + b, unrolled for the 1-row case.
  for (int k = 0; k < in; ++k) {
    double xv = x.at(0, k);
    if (xv == 0.0) continue;
    const double *wrow = wx.value.row_ptr(k);
    for (int j = 0; j < 4 * hid; ++j) z.at(0, j) += xv * wrow[j];
  }
  for (int k = 0; k < hid; ++k) {
    double hv = h.at(0, k);
    if (hv == 0.0) continue;
    const double *wrow = wh.value.row_ptr(k);
    for (int j = 0; j < 4 * hid; ++j) z.at(0, j) += hv * wrow[j];
  }
  for (int j = 0; j < hid; ++j) {
    double i_g = 1.0 / (1.0 + std::exp(-z.at(0, j)));
    double f_g = 1.0 / (1.0 + std::exp(-z.at(0, hid + j)));
    double g_g = std::tanh(z.at(0, 2 * hid + j));
    double o_g = 1.0 / (1.0 + std::exp(-z.at(0, 3 * hid + j)));
    double cj = f_g * c.at(0, j) + i_g * g_g;
    c.at(0, j) = cj;
    h.at(0, j) = o_g * std::tanh(cj);
  }
}

std::pair<Tape::Var, Tape::Var> LstmCell::step_tape(Tape &t, Tape::Var x,
                                                    Tape::Var h,
                                                    Tape::Var c) const {
  // Registering per step keeps the call self-contained; the tape memoizes
  // params so repeated steps share one node per leaf.
  Tape::Var wxv = t.param(const_cast<Param &>(wx));
  Tape::Var whv = t.param(const_cast<Param &>(wh));
  Tape::Var bv = t.param(const_cast<Param &>(b));
  Tape::Var z = t.add(t.add(t.matmul(x, wxv), t.matmul(h, whv)), bv);
  Tape::Var i_g = t.sigmoid_op(t.slice_cols(z, 0, hid));
  Tape::Var f_g = t.sigmoid_op(t.slice_cols(z, hid, 2 * hid));
  Tape::Var g_g = t.tanh_op(t.slice_cols(z, 2 * hid, 3 * hid));
  Tape::Var o_g = t.sigmoid_op(t.slice_cols(z, 3 * hid, 4 * hid));
  Tape::Var c_new = t.add(t.mul(f_g, c), t.mul(i_g, g_g));
  Tape::Var h_new = t.mul(o_g, t.tanh_op(c_new));
  return {h_new, c_new};
}

RecurrentEncoder::RecurrentEncoder(const std::string &name,
                                   RecurrentEncoderConfig config,
                                   std::mt19937_64 &rng)
    : cfg(config) {
  if (cfg.pyramid_factor < 1 || (cfg.pyramid_factor & (cfg.pyramid_factor - 1)))
    throw InvalidConfig("pyramid_factor must be a power of two >= 1");
  if (cfg.num_layers < num_pyramid_layers() || cfg.num_layers < 1)
    throw InvalidConfig("num_layers too small for pyramid_factor");
  int width = cfg.input_dim;
  for (int l = 0; l < cfg.num_layers; ++l) {
    int in_dim = downsamples_before(l) ? 2 * width : width;
    fwd.emplace_back(name + ".l" + std::to_string(l) + ".fwd", in_dim,
                     cfg.hidden_dim, rng);
    if (cfg.direction == Direction::Bidirectional)
      bwd.emplace_back(name + ".l" + std::to_string(l) + ".bwd", in_dim,
                       cfg.hidden_dim, rng);
    width = output_dim();
  }
}

int RecurrentEncoder::num_pyramid_layers() const {
  int p = 0;
  for (int f = cfg.pyramid_factor; f > 1; f /= 2) ++p;
  return p;
}

bool RecurrentEncoder::downsamples_before(int layer) const {
  return layer >= cfg.num_layers - num_pyramid_layers();
}

namespace {

// Pair adjacent rows, zero-padding an odd tail.
Matrix pair_rows(const Matrix &x) {
  int t_out = (x.rows + 1) / 2;
  Matrix out(t_out, 2 * x.cols);
  for (int i = 0; i < t_out; ++i) {
    for (int j = 0; j < x.cols; ++j) out.at(i, j) = x.at(2 * i, j);
    if (2 * i + 1 < x.rows)
      for (int j = 0; j < x.cols; ++j) out.at(i, x.cols + j) = x.at(2 * i + 1, j);
  }
  return out;
}

}  // namespace

Matrix RecurrentEncoder::encode(const Matrix &x) const {
  if (x.cols != cfg.input_dim) throw ShapeError("encoder input dim mismatch");
  if (x.rows < 1) throw ShapeError("encoder needs at least one frame");
  Matrix cur = x;
  for (int l = 0; l < cfg.num_layers; ++l) {
    if (downsamples_before(l)) cur = pair_rows(cur);
    Matrix out(cur.rows, output_dim());
    Matrix h(1, cfg.hidden_dim), c(1, cfg.hidden_dim);
    for (int i = 0; i < cur.rows; ++i) {
      Matrix xi = cur.row(i);
      fwd[l].step(xi, h, c);
      for (int j = 0; j < cfg.hidden_dim; ++j) out.at(i, j) = h.at(0, j);
    }
    if (cfg.direction == Direction::Bidirectional) {
      Matrix hb(1, cfg.hidden_dim), cb(1, cfg.hidden_dim);
      for (int i = cur.rows - 1; i >= 0; --i) {
        Matrix xi = cur.row(i);
        bwd[l].step(xi, hb, cb);
        for (int j = 0; j < cfg.hidden_dim; ++j)
          out.at(i, cfg.hidden_dim + j) = hb.at(0, j);
      }
    }
    cur = std::move(out);
  }
  return cur;
}

std::vector<Tape::Var> RecurrentEncoder::encode_tape(
    Tape &t, const std::vector<Tape::Var> &x) const {
  if (x.empty()) throw ShapeError("encoder needs at least one frame");
  std::vector<Tape::Var> cur = x;
  for (int l = 0; l < cfg.num_layers; ++l) {
    if (downsamples_before(l)) {
      std::vector<Tape::Var> paired;
      for (size_t i = 0; i < cur.size(); i += 2) {
        Tape::Var second =
            i + 1 < cur.size()
                ? cur[i + 1]
                : t.constant(Matrix(1, t.value(cur[i]).cols));
        paired.push_back(t.concat_cols(cur[i], second));
      }
      cur = std::move(paired);
    }
    std::vector<Tape::Var> out(cur.size());
    Tape::Var h = t.constant(Matrix(1, cfg.hidden_dim));
    Tape::Var c = t.constant(Matrix(1, cfg.hidden_dim));
    for (size_t i = 0; i < cur.size(); ++i) {
      auto [hn, cn] = fwd[l].step_tape(t, cur[i], h, c);
      h = hn;
      c = cn;
      out[i] = hn;
    }
    if (cfg.direction == Direction::Bidirectional) {
      Tape::Var hb = t.constant(Matrix(1, cfg.hidden_dim));
      Tape::Var cb = t.constant(Matrix(1, cfg.hidden_dim));
      for (int i = static_cast<int>(cur.size()) - 1; i >= 0; --i) {
        auto [hn, cn] = bwd[l].step_tape(t, cur[i], hb, cb);
        hb = hn;
        cb = cn;
        out[i] = t.concat_cols(out[i], hn);
      }
    }
    cur = std::move(out);
  }
  return cur;
}

EncoderState RecurrentEncoder::make_state() const {
  if (cfg.direction != Direction::Forward)
    throw InvalidConfig("streaming requires a Forward encoder");
  EncoderState s;
  s.h.assign(cfg.num_layers, Matrix(1, cfg.hidden_dim));
  s.c.assign(cfg.num_layers, Matrix(1, cfg.hidden_dim));
  s.pending.resize(cfg.num_layers);
  return s;
}

std::optional<Matrix> RecurrentEncoder::step(EncoderState &state,
                                             const Matrix &frame) const {
  if (frame.rows != 1 || frame.cols != cfg.input_dim)
    throw ShapeError("streaming step expects a 1 x input_dim frame");
  ++state.frames_consumed;
  Matrix cur = frame;
  for (int l = 0; l < cfg.num_layers; ++l) {
    if (downsamples_before(l)) {
      auto &buf = state.pending[l];
      buf.push_back(std::move(cur));
      if (buf.size() < 2) return std::nullopt;
      cur = rtrack::concat_cols(buf[0], buf[1]);
      buf.clear();
    }
    fwd[l].step(cur, state.h[l], state.c[l]);
    cur = state.h[l];
  }
  return cur;
}

std::vector<Matrix> RecurrentEncoder::finish(EncoderState &state) const {
  std::vector<Matrix> emitted;
  for (int l = 0; l < cfg.num_layers; ++l) {
    auto &buf = state.pending[l];
    if (buf.empty()) continue;
    // Zero-pad the odd tail, exactly as the batch path pairs rows.
    Matrix cur = rtrack::concat_cols(buf[0], Matrix(1, buf[0].cols));
    buf.clear();
    fwd[l].step(cur, state.h[l], state.c[l]);
    cur = state.h[l];
    // Cascade the late row through the remaining layers.
    for (int k = l + 1; k < cfg.num_layers; ++k) {
      if (downsamples_before(k)) {
        auto &kb = state.pending[k];
        kb.push_back(std::move(cur));
        if (kb.size() < 2) {
          cur = Matrix();
          break;
        }
        cur = rtrack::concat_cols(kb[0], kb[1]);
        kb.clear();
      }
      fwd[k].step(cur, state.h[k], state.c[k]);
      cur = state.h[k];
    }
    if (cur.rows == 1) emitted.push_back(cur);
  }
  return emitted;
}

AdditiveAttention::AdditiveAttention(const std::string &name, int g_dim,
                                     int h_dim, int attn_dim,
                                     std::mt19937_64 &rng, double init_scale)
    : w1(name + ".w1", Matrix(g_dim, attn_dim)),
      w2(name + ".w2", Matrix(h_dim, attn_dim)),
      v(name + ".v", Matrix(attn_dim, 1)),
      k(attn_dim) {
  init_uniform(w1, g_dim, rng);
  init_uniform(w2, h_dim, rng);
  init_uniform(v, attn_dim, rng);
  // Attention scores need a wide dynamic range before softmax can commit
  // to a frame; doubling the initial score weights roughly halves the
  // epochs the head needs to sharpen.
  for (auto *p : {&w1, &w2, &v})
    for (double &x : p->value.data) x *= 1.0;
}

Matrix AdditiveAttention::project(const Matrix &g) const {
  if (g.cols != w1.value.rows) throw ShapeError("attention g dim mismatch");
  return matmul(g, w1.value);
}

Matrix AdditiveAttention::attend(const Matrix &g_proj, const Matrix &h) const {
  if (h.cols != w2.value.rows) throw ShapeError("attention h dim mismatch");
  Matrix q = matmul(h, w2.value);  // 1 x k
  Matrix scores(1, g_proj.rows);
  for (int i = 0; i < g_proj.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < k; ++j)
      s += v.value.at(j, 0) * std::tanh(g_proj.at(i, j) + q.at(0, j));
    scores.at(0, i) = s;
  }
  softmax_inplace(scores.row_ptr(0), scores.cols);
  return scores;
}

Tape::Var AdditiveAttention::project_tape(Tape &t, Tape::Var g,
                                          Tape::Var w1_var) {
  return t.matmul(g, w1_var);
}

Tape::Var AdditiveAttention::attend_tape_log(Tape &t, Tape::Var g_proj,
                                             Tape::Var h, Tape::Var w2_var,
                                             Tape::Var v_var) {
  Tape::Var q = t.matmul(h, w2_var);                        // 1 x k
  Tape::Var s = t.tanh_op(t.add_broadcast_row(g_proj, q));  // m x k
  Tape::Var scores = t.transpose_op(t.matmul(s, v_var));    // 1 x m
  return t.log_softmax_row(scores);
}

}  // namespace rtrack::nn
