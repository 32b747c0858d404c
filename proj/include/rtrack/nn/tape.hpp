// include/rtrack/nn/tape.hpp

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

#ifndef RTRACK_NN_TAPE_HPP_
#define RTRACK_NN_TAPE_HPP_

#include <functional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "rtrack/matrix.hpp"

namespace rtrack::nn {

// A learnable tensor with a same-shape gradient accumulator.
struct Param {
  std::string name;
  Matrix value;
  Matrix grad;

  Param() = default;
  Param(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(value.rows, value.cols) {}

  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
};

// Reverse-mode tape over dense matrices. One tape per forward pass;
// backward() accumulates into the referenced Params, additively across
// calls until the grads are zeroed.
class Tape {
 public:
  using Var = int;

  Var param(Param &p);
  Var constant(Matrix m);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);                    // same shape
  Var add_broadcast_row(Var m, Var r);      // r is 1xC, added to every row
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);                    // elementwise
  Var mul_const(Var a, Matrix weights);     // elementwise with a constant
  Var scale(Var a, double s);
  Var tanh_op(Var a);
  Var sigmoid_op(Var a);
  Var exp_op(Var a);
  Var slice_cols(Var a, int c0, int c1);
  Var concat_cols(Var a, Var b);
  Var concat_rows(const std::vector<Var> &rows);
  Var select_row(Var a, int r);             // 1xC copy of one row
  Var transpose_op(Var a);
  Var log_softmax_row(Var a);               // a is 1xC
  Var sum(Var a);                           // 1x1

  const Matrix &value(Var v) const { return nodes_[v].val; }
  double scalar(Var v) const { return nodes_[v].val.at(0, 0); }
  size_t size() const { return nodes_.size(); }

  // Reverse sweep from a 1x1 loss node. Throws NumericError naming the
  // op if a non-finite value or gradient is met.
  void backward(Var loss);

 private:
  struct Node {
    Matrix val;
    Matrix grad;
    const char *op = "leaf";
    std::function<void(Tape &, Node &)> back;  // pulls node.grad into parents
    Param *leaf = nullptr;
  };

  Var push(Matrix val, const char *op, std::function<void(Tape &, Node &)> back);
  // Grads are allocated on first touch; a node never reached by the
  // reverse sweep keeps an empty grad and is skipped.
  Matrix &grad_of(Var v) {
    Node &n = nodes_[v];
    if (n.grad.data.empty()) n.grad = Matrix(n.val.rows, n.val.cols);
    return n.grad;
  }
  void check_finite(const Matrix &m, const char *op) const;

  std::vector<Node> nodes_;
  std::unordered_map<const Param *, Var> param_cache_;
};

// Global-norm gradient clipping followed by p <- p - lr * grad for every
// param; grads are zeroed afterwards.
void sgd_step(const std::vector<Param *> &params, double learning_rate,
              double clip_norm);

// Central finite differences against the analytic gradients. loss_fn(true)
// must compute the loss and accumulate gradients; loss_fn(false) is a
// forward-only evaluation. Samples at most max_coords coordinates per
// param. Returns the max relative error.
double grad_check(const std::function<double(bool accumulate_grads)> &loss_fn,
                  const std::vector<Param *> &params, double eps = 1e-5,
                  int max_coords = 200, uint64_t seed = 17);

// uniform(-s, s) with s = 1/sqrt(fan_in).
void init_uniform(Param &p, int fan_in, std::mt19937_64 &rng);

}  // namespace rtrack::nn

#endif  // RTRACK_NN_TAPE_HPP_
