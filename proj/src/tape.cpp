// src/tape.cpp

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

#include "rtrack/nn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "rtrack/errors.hpp"

namespace rtrack::nn {

void Tape::check_finite(const Matrix &m, const char *op) const {
  if (!m.all_finite())
    throw NumericError(std::string("non-finite value in op '") + op + "'");
}

Tape::Var Tape::push(Matrix val, const char *op,
                     std::function<void(Tape &, Node &)> back) {
  Node n;
  n.val = std::move(val);
  n.op = op;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<Var>(nodes_.size() - 1);
}

Tape::Var Tape::param(Param &p) {
  // Memoized: every use of a param within one tape shares a single node,
  // so its gradient accumulates there before the one flush into the leaf.
  auto it = param_cache_.find(&p);
  if (it != param_cache_.end()) return it->second;
  Var v = push(p.value, "param", {});
  nodes_[v].leaf = &p;
  param_cache_.emplace(&p, v);
  return v;
}

Tape::Var Tape::constant(Matrix m) { return push(std::move(m), "const", {}); }

Tape::Var Tape::matmul(Var a, Var b) {
  const Matrix &A = nodes_[a].val, &B = nodes_[b].val;
  if (A.cols != B.rows) throw ShapeError("matmul inner dims disagree");
  return push(rtrack::matmul(A, B), "matmul", [a, b](Tape &t, Node &n) {
    // dA += G * B^T ; dB += A^T * G, both as row-major dot/axpy sweeps.
    const Matrix &A = t.nodes_[a].val, &B = t.nodes_[b].val, &G = n.grad;
    Matrix &dA = t.grad_of(a), &dB = t.grad_of(b);
    for (int i = 0; i < G.rows; ++i) {
      const double *grow = G.row_ptr(i);
      double *darow = dA.row_ptr(i);
      for (int k = 0; k < A.cols; ++k) {
        const double *brow = B.row_ptr(k);
        double s = 0.0;
        for (int j = 0; j < G.cols; ++j) s += grow[j] * brow[j];
        darow[k] += s;
      }
      const double *arow = A.row_ptr(i);
      for (int k = 0; k < A.cols; ++k) {
        double aik = arow[k];
        if (aik == 0.0) continue;
        double *dbrow = dB.row_ptr(k);
        for (int j = 0; j < G.cols; ++j) dbrow[j] += aik * grow[j];
      }
    }
  });
}

Tape::Var Tape::add(Var a, Var b) {
  const Matrix &A = nodes_[a].val, &B = nodes_[b].val;
  if (!A.same_shape(B)) throw ShapeError("add shape mismatch");
  return push(rtrack::add(A, B), "add", [a, b](Tape &t, Node &n) {
    Matrix &dA = t.grad_of(a), &dB = t.grad_of(b);
    for (size_t i = 0; i < n.grad.data.size(); ++i) {
      dA.data[i] += n.grad.data[i];
      dB.data[i] += n.grad.data[i];
    }
  });
}

Tape::Var Tape::add_broadcast_row(Var m, Var r) {
  const Matrix &M = nodes_[m].val, &R = nodes_[r].val;
  if (R.rows != 1 || R.cols != M.cols)
    throw ShapeError("add_broadcast_row expects a 1xC row");
  Matrix out = M;
  for (int i = 0; i < M.rows; ++i)
    for (int j = 0; j < M.cols; ++j) out.at(i, j) += R.at(0, j);
  return push(std::move(out), "add_broadcast_row", [m, r](Tape &t, Node &n) {
    Matrix &dM = t.grad_of(m), &dR = t.grad_of(r);
    for (int i = 0; i < n.grad.rows; ++i)
      for (int j = 0; j < n.grad.cols; ++j) {
        dM.at(i, j) += n.grad.at(i, j);
        dR.at(0, j) += n.grad.at(i, j);
      }
  });
}

Tape::Var Tape::sub(Var a, Var b) {
  const Matrix &A = nodes_[a].val, &B = nodes_[b].val;
  if (!A.same_shape(B)) throw ShapeError("sub shape mismatch");
  Matrix out = A;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= B.data[i];
  return push(std::move(out), "sub", [a, b](Tape &t, Node &n) {
    Matrix &dA = t.grad_of(a), &dB = t.grad_of(b);
    for (size_t i = 0; i < n.grad.data.size(); ++i) {
      dA.data[i] += n.grad.data[i];
      dB.data[i] -= n.grad.data[i];
    }
  });
}

Tape::Var Tape::mul(Var a, Var b) {
  const Matrix &A = nodes_[a].val, &B = nodes_[b].val;
  if (!A.same_shape(B)) throw ShapeError("mul shape mismatch");
  Matrix out = A;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= B.data[i];
  return push(std::move(out), "mul", [a, b](Tape &t, Node &n) {
    const Matrix &A = t.nodes_[a].val, &B = t.nodes_[b].val;
    Matrix &dA = t.grad_of(a), &dB = t.grad_of(b);
    for (size_t i = 0; i < n.grad.data.size(); ++i) {
      dA.data[i] += n.grad.data[i] * B.data[i];
      dB.data[i] += n.grad.data[i] * A.data[i];
    }
  });
}

Tape::Var Tape::mul_const(Var a, Matrix weights) {
  const Matrix &A = nodes_[a].val;
  if (!A.same_shape(weights)) throw ShapeError("mul_const shape mismatch");
  Matrix out = A;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= weights.data[i];
  auto w = std::make_shared<Matrix>(std::move(weights));
  return push(std::move(out), "mul_const", [a, w](Tape &t, Node &n) {
    Matrix &dA = t.grad_of(a);
    for (size_t i = 0; i < n.grad.data.size(); ++i)
      dA.data[i] += n.grad.data[i] * w->data[i];
  });
}

Tape::Var Tape::scale(Var a, double s) {
  Matrix out = nodes_[a].val;
  for (double &x : out.data) x *= s;
  return push(std::move(out), "scale", [a, s](Tape &t, Node &n) {
    Matrix &dA = t.grad_of(a);
    for (size_t i = 0; i < n.grad.data.size(); ++i)
      dA.data[i] += n.grad.data[i] * s;
  });
}

Tape::Var Tape::tanh_op(Var a) {
  Matrix out = nodes_[a].val;
  for (double &x : out.data) x = std::tanh(x);
  return push(std::move(out), "tanh", [a](Tape &t, Node &n) {
    Matrix &dA = t.grad_of(a);
    for (size_t i = 0; i < n.grad.data.size(); ++i) {
      double y = n.val.data[i];
      dA.data[i] += n.grad.data[i] * (1.0 - y * y);
    }
  });
}

Tape::Var Tape::sigmoid_op(Var a) {
  Matrix out = nodes_[a].val;
  for (double &x : out.data) x = 1.0 / (1.0 + std::exp(-x));
  return push(std::move(out), "sigmoid", [a](Tape &t, Node &n) {
    Matrix &dA = t.grad_of(a);
    for (size_t i = 0; i < n.grad.data.size(); ++i) {
      double y = n.val.data[i];
      dA.data[i] += n.grad.data[i] * y * (1.0 - y);
    }
  });
}

Tape::Var Tape::exp_op(Var a) {
  Matrix out = nodes_[a].val;
  for (double &x : out.data) x = std::exp(x);
  check_finite(out, "exp");  // exp is the one op that can overflow forward
  return push(std::move(out), "exp", [a](Tape &t, Node &n) {
    Matrix &dA = t.grad_of(a);
    for (size_t i = 0; i < n.grad.data.size(); ++i)
      dA.data[i] += n.grad.data[i] * n.val.data[i];
  });
}

Tape::Var Tape::slice_cols(Var a, int c0, int c1) {
  const Matrix &A = nodes_[a].val;
  if (c0 < 0 || c1 > A.cols || c0 >= c1) throw ShapeError("bad column slice");
  Matrix out(A.rows, c1 - c0);
  for (int i = 0; i < A.rows; ++i)
    for (int j = c0; j < c1; ++j) out.at(i, j - c0) = A.at(i, j);
  return push(std::move(out), "slice_cols", [a, c0](Tape &t, Node &n) {
    Matrix &dA = t.grad_of(a);
    for (int i = 0; i < n.grad.rows; ++i)
      for (int j = 0; j < n.grad.cols; ++j)
        dA.at(i, c0 + j) += n.grad.at(i, j);
  });
}

Tape::Var Tape::concat_cols(Var a, Var b) {
  const Matrix &A = nodes_[a].val, &B = nodes_[b].val;
  if (A.rows != B.rows) throw ShapeError("concat_cols row mismatch");
  int ac = A.cols;
  return push(rtrack::concat_cols(A, B), "concat_cols",
              [a, b, ac](Tape &t, Node &n) {
                Matrix &dA = t.grad_of(a), &dB = t.grad_of(b);
                for (int i = 0; i < n.grad.rows; ++i) {
                  for (int j = 0; j < ac; ++j) dA.at(i, j) += n.grad.at(i, j);
                  for (int j = ac; j < n.grad.cols; ++j)
                    dB.at(i, j - ac) += n.grad.at(i, j);
                }
              });
}

Tape::Var Tape::concat_rows(const std::vector<Var> &rows) {
  if (rows.empty()) throw ShapeError("concat_rows of nothing");
  int cols = nodes_[rows[0]].val.cols;
  int total = 0;
  for (Var v : rows) {
    if (nodes_[v].val.cols != cols) throw ShapeError("concat_rows col mismatch");
    total += nodes_[v].val.rows;
  }
  Matrix out(total, cols);
  int r = 0;
  for (Var v : rows) {
    const Matrix &M = nodes_[v].val;
    for (int i = 0; i < M.rows; ++i, ++r)
      for (int j = 0; j < cols; ++j) out.at(r, j) = M.at(i, j);
  }
  auto parts = std::make_shared<std::vector<Var>>(rows);
  return push(std::move(out), "concat_rows", [parts](Tape &t, Node &n) {
    int r = 0;
    for (Var v : *parts) {
      Matrix &dP = t.grad_of(v);
      for (int i = 0; i < dP.rows; ++i, ++r)
        for (int j = 0; j < dP.cols; ++j) dP.at(i, j) += n.grad.at(r, j);
    }
  });
}

Tape::Var Tape::select_row(Var a, int r) {
  const Matrix &A = nodes_[a].val;
  if (r < 0 || r >= A.rows) throw ShapeError("select_row out of range");
  return push(A.row(r), "select_row", [a, r](Tape &t, Node &n) {
    Matrix &dA = t.grad_of(a);
    for (int j = 0; j < n.grad.cols; ++j) dA.at(r, j) += n.grad.at(0, j);
  });
}

Tape::Var Tape::transpose_op(Var a) {
  return push(rtrack::transpose(nodes_[a].val), "transpose",
              [a](Tape &t, Node &n) {
                Matrix &dA = t.grad_of(a);
                for (int i = 0; i < n.grad.rows; ++i)
                  for (int j = 0; j < n.grad.cols; ++j)
                    dA.at(j, i) += n.grad.at(i, j);
              });
}

Tape::Var Tape::log_softmax_row(Var a) {
  const Matrix &A = nodes_[a].val;
  if (A.rows != 1) throw ShapeError("log_softmax_row expects a 1xC row");
  double lse = logsumexp(A.data.data(), A.cols);
  Matrix out = A;
  for (double &x : out.data) x -= lse;
  return push(std::move(out), "log_softmax_row", [a](Tape &t, Node &n) {
    // dx = g - softmax * sum(g)
    Matrix &dA = t.grad_of(a);
    double gsum = 0.0;
    for (double g : n.grad.data) gsum += g;
    for (int j = 0; j < n.grad.cols; ++j)
      dA.at(0, j) += n.grad.at(0, j) - std::exp(n.val.at(0, j)) * gsum;
  });
}

Tape::Var Tape::sum(Var a) {
  const Matrix &A = nodes_[a].val;
  double s = 0.0;
  for (double x : A.data) s += x;
  Matrix out(1, 1);
  out.at(0, 0) = s;
  return push(std::move(out), "sum", [a](Tape &t, Node &n) {
    Matrix &dA = t.grad_of(a);
    double g = n.grad.at(0, 0);
    for (double &x : dA.data) x += g;
  });
}

void Tape::backward(Var loss) {
  if (nodes_[loss].val.rows != 1 || nodes_[loss].val.cols != 1)
    throw ShapeError("backward expects a scalar loss node");
  grad_of(loss).at(0, 0) += 1.0;
  for (int v = loss; v >= 0; --v) {
    Node &n = nodes_[v];
    if (n.grad.data.empty()) continue;  // not reached from the loss
    check_finite(n.val, n.op);
    check_finite(n.grad, n.op);
    if (n.back) n.back(*this, n);
    if (n.leaf) {
      for (size_t i = 0; i < n.grad.data.size(); ++i)
        n.leaf->grad.data[i] += n.grad.data[i];
    }
  }
}

void sgd_step(const std::vector<Param *> &params, double learning_rate,
              double clip_norm) {
  if (!(learning_rate > 0.0)) throw InvalidConfig("learning rate must be > 0");
  if (!(clip_norm > 0.0)) throw InvalidConfig("clip norm must be > 0");
  double sq = 0.0;
  for (const Param *p : params)
    for (double g : p->grad.data) sq += g * g;
  double norm = std::sqrt(sq);
  double scale = norm > clip_norm ? clip_norm / norm : 1.0;
  for (Param *p : params) {
    for (size_t i = 0; i < p->value.data.size(); ++i)
      p->value.data[i] -= learning_rate * scale * p->grad.data[i];
    p->zero_grad();
  }
}

double grad_check(const std::function<double(bool)> &loss_fn,
                  const std::vector<Param *> &params, double eps,
                  int max_coords, uint64_t seed) {
  for (Param *p : params) p->zero_grad();
  loss_fn(true);
  std::mt19937_64 rng(seed);
  double max_rel = 0.0;
  for (Param *p : params) {
    int n = static_cast<int>(p->value.data.size());
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    if (n > max_coords) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(max_coords);
    }
    for (int i : idx) {
      double saved = p->value.data[i];
      p->value.data[i] = saved + eps;
      double up = loss_fn(false);
      p->value.data[i] = saved - eps;
      double dn = loss_fn(false);
      p->value.data[i] = saved;
      double numeric = (up - dn) / (2.0 * eps);
      double analytic = p->grad.data[i];
      double rel = std::fabs(analytic - numeric) /
                   std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
      max_rel = std::max(max_rel, rel);
    }
  }
  for (Param *p : params) p->zero_grad();
  return max_rel;
}

void init_uniform(Param &p, int fan_in, std::mt19937_64 &rng) {
  // A 1/sqrt(fan_in) bound leaves every tanh near its linear region, where
  // the attention score gradient w.r.t. the query path cancels (the query
  // shifts all scores equally). The wider bound keeps early training alive.
  double s = 4.0 / std::sqrt(static_cast<double>(std::max(fan_in, 1)));
  for (double &x : p.value.data) {
    // 53-bit uniform in [0,1), engine-order deterministic.
    double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    x = (2.0 * u - 1.0) * s;
  }
}

}  // namespace rtrack::nn
