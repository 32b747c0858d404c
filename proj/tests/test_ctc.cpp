// tests/test_ctc.cpp

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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "rtrack/aligner.hpp"
#include "rtrack/errors.hpp"

using namespace rtrack;
using namespace rtrack::aligner;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Exhaustive path enumeration over the blank-interleaved state graph.
// Small n and vocab only; this is the independent reference the trellis
// and Viterbi are checked against.
struct PathSet {
  std::vector<std::vector<int>> paths;
  std::vector<double> scores;
};

void enumerate_rec(const Matrix &em, const CtcLabelSequence &labels, int t,
                   int s, std::vector<int> &cur, double score, PathSet &out) {
  score += em.at(t, labels.states[s]);
  cur.push_back(s);
  if (t == em.rows - 1) {
    int last = labels.num_states() - 1;
    if (s == last || s == last - 1) {
      out.paths.push_back(cur);
      out.scores.push_back(score);
    }
  } else {
    enumerate_rec(em, labels, t + 1, s, cur, score, out);
    if (s + 1 < labels.num_states())
      enumerate_rec(em, labels, t + 1, s + 1, cur, score, out);
    if (s + 2 < labels.num_states() && !labels.is_blank(s + 2) &&
        labels.states[s + 2] != labels.states[s])
      enumerate_rec(em, labels, t + 1, s + 2, cur, score, out);
  }
  cur.pop_back();
}

PathSet enumerate_paths(const Matrix &em, const CtcLabelSequence &labels) {
  PathSet out;
  std::vector<int> cur;
  enumerate_rec(em, labels, 0, 0, cur, 0.0, out);
  if (labels.num_states() > 1) enumerate_rec(em, labels, 0, 1, cur, 0.0, out);
  return out;
}

double oracle_total(const PathSet &ps) {
  if (ps.scores.empty()) return -kInf;
  double mx = -kInf;
  for (double s : ps.scores) mx = std::max(mx, s);
  double acc = 0.0;
  for (double s : ps.scores) acc += std::exp(s - mx);
  return mx + std::log(acc);
}

// Among max-score paths: the smaller final state wins, then scanning
// t = n-2 .. 0 the larger state wins. Mirrors the greedy backtrack.
std::vector<int> oracle_best(const PathSet &ps) {
  REQUIRE(!ps.paths.empty());
  int best = 0;
  for (size_t i = 1; i < ps.paths.size(); ++i) {
    if (ps.scores[i] > ps.scores[best] + 1e-12) {
      best = static_cast<int>(i);
      continue;
    }
    if (ps.scores[i] < ps.scores[best] - 1e-12) continue;
    const auto &a = ps.paths[i], &b = ps.paths[best];
    int n = static_cast<int>(a.size());
    if (a[n - 1] != b[n - 1]) {
      if (a[n - 1] < b[n - 1]) best = static_cast<int>(i);
      continue;
    }
    for (int t = n - 2; t >= 0; --t) {
      if (a[t] != b[t]) {
        if (a[t] > b[t]) best = static_cast<int>(i);
        break;
      }
    }
  }
  return ps.paths[best];
}

// A valid path needs one frame per char plus a separating blank frame
// between adjacent equal chars.
int min_frames(const std::vector<int> &chars) {
  int need = static_cast<int>(chars.size());
  for (size_t i = 1; i < chars.size(); ++i)
    if (chars[i] == chars[i - 1]) ++need;
  return need;
}

Matrix random_log_emissions(int n, int vocab, std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> d(-3.0, 0.0);
  Matrix em(n, vocab);
  for (int t = 0; t < n; ++t) {
    double lse = -kInf;
    for (int j = 0; j < vocab; ++j) em.at(t, j) = d(rng);
    for (int j = 0; j < vocab; ++j)
      lse = lse == -kInf ? em.at(t, j)
                         : std::max(lse, em.at(t, j)) +
                               std::log1p(std::exp(-std::fabs(lse - em.at(t, j))));
    for (int j = 0; j < vocab; ++j) em.at(t, j) -= lse;
  }
  return em;
}

}  // namespace

TEST_CASE("single frame single char base case") {
  // n=1, labels [blank, c, blank]: the only valid path sits on the char.
  Matrix em(1, 3);
  em.at(0, 0) = std::log(0.2);
  em.at(0, 1) = std::log(0.5);
  em.at(0, 2) = std::log(0.3);  // blank
  CtcLabelSequence labels = CtcLabelSequence::from_chars({1}, 2);
  CtcTrellis tr = ctc_trellis(em, labels);
  CHECK(tr.total_log_prob == doctest::Approx(std::log(0.5)));
  std::vector<int> path = ctc_best_path(em, labels);
  REQUIRE(path.size() == 1);
  CHECK(path[0] == 1);
}

TEST_CASE("two frames one char hand computed total") {
  // Paths for "a" over 2 frames: aa, a., .a  (".": blank).
  Matrix em(2, 2);
  em.at(0, 0) = std::log(0.6);  // char
  em.at(0, 1) = std::log(0.4);  // blank
  em.at(1, 0) = std::log(0.7);
  em.at(1, 1) = std::log(0.3);
  CtcLabelSequence labels = CtcLabelSequence::from_chars({0}, 1);
  CtcTrellis tr = ctc_trellis(em, labels);
  double expect = 0.6 * 0.7 + 0.6 * 0.3 + 0.4 * 0.7;
  CHECK(tr.total_log_prob == doctest::Approx(std::log(expect)));
  // Best single path is aa with 0.42.
  std::vector<int> path = ctc_best_path(em, labels);
  CHECK(path == std::vector<int>{1, 1});
}

TEST_CASE("trellis total matches exhaustive enumeration") {
  std::mt19937_64 rng(31);
  for (int it = 0; it < 60; ++it) {
    int vocab = 2 + static_cast<int>(rng() % 2);  // chars + blank <= 3+1
    int m = 1 + static_cast<int>(rng() % 3);
    std::vector<int> chars(m);
    for (int &c : chars) c = static_cast<int>(rng() % vocab);
    int n = min_frames(chars) + static_cast<int>(rng() % 4);
    CtcLabelSequence labels = CtcLabelSequence::from_chars(chars, vocab);
    Matrix em = random_log_emissions(n, vocab + 1, rng);
    PathSet ps = enumerate_paths(em, labels);
    REQUIRE(!ps.paths.empty());
    CtcTrellis tr = ctc_trellis(em, labels);
    CHECK(tr.total_log_prob == doctest::Approx(oracle_total(ps)).epsilon(1e-9));
  }
}

TEST_CASE("viterbi path matches exhaustive enumeration") {
  std::mt19937_64 rng(32);
  for (int it = 0; it < 60; ++it) {
    int vocab = 2 + static_cast<int>(rng() % 2);
    int m = 1 + static_cast<int>(rng() % 3);
    std::vector<int> chars(m);
    for (int &c : chars) c = static_cast<int>(rng() % vocab);
    int n = min_frames(chars) + static_cast<int>(rng() % 4);
    CtcLabelSequence labels = CtcLabelSequence::from_chars(chars, vocab);
    Matrix em = random_log_emissions(n, vocab + 1, rng);
    PathSet ps = enumerate_paths(em, labels);
    std::vector<int> got = ctc_best_path(em, labels);
    CHECK(got == oracle_best(ps));
  }
}

TEST_CASE("viterbi tie breaking on uniform emissions matches oracle") {
  // Every path has the same score; only the tie rules decide.
  for (int n : {2, 3, 4, 5}) {
    Matrix em(n, 3);
    for (double &x : em.data) x = std::log(1.0 / 3.0);
    CtcLabelSequence labels = CtcLabelSequence::from_chars({0, 1}, 2);
    PathSet ps = enumerate_paths(em, labels);
    CHECK(ctc_best_path(em, labels) == oracle_best(ps));
  }
}

TEST_CASE("best path is monotone with steps of at most two") {
  std::mt19937_64 rng(33);
  for (int it = 0; it < 20; ++it) {
    int m = 2 + static_cast<int>(rng() % 3);
    std::vector<int> chars(m);
    for (int &c : chars) c = static_cast<int>(rng() % 3);
    int n = min_frames(chars) + 2 + static_cast<int>(rng() % 6);
    CtcLabelSequence labels = CtcLabelSequence::from_chars(chars, 3);
    Matrix em = random_log_emissions(n, 4, rng);
    std::vector<int> path = ctc_best_path(em, labels);
    for (size_t t = 1; t < path.size(); ++t) {
      int d = path[t] - path[t - 1];
      CHECK(d >= 0);
      CHECK(d <= 2);
    }
    int last = labels.num_states() - 1;
    CHECK((path.back() == last || path.back() == last - 1));
  }
}

TEST_CASE("one-hot emissions recover the planted alignment") {
  // Frames: a a a b b  (with leading/trailing certainty, no blanks win).
  std::vector<int> frame_chars{0, 0, 0, 1, 1};
  Matrix em(5, 3);
  for (int t = 0; t < 5; ++t)
    for (int j = 0; j < 3; ++j)
      em.at(t, j) = frame_chars[t] == j ? std::log(0.98) : std::log(0.01);
  CtcLabelSequence labels = CtcLabelSequence::from_chars({0, 1}, 2);
  CtcTrellis tr = ctc_trellis(em, labels);
  AlignmentMatrix hard = ctc_backtrack(tr, em, labels);
  CHECK(hard.kind == AlignKind::Hard);
  CHECK(hard.orientation == Orientation::TextToSpeech);
  REQUIRE(hard.values.rows == 2);
  REQUIRE(hard.values.cols == 5);
  for (int t = 0; t < 5; ++t) {
    CHECK(hard.values.at(0, t) == (t < 3 ? 1.0 : 0.0));
    CHECK(hard.values.at(1, t) == (t < 3 ? 0.0 : 1.0));
  }
  CHECK_NOTHROW(hard.validate());
}

TEST_CASE("repeated characters require a separating blank") {
  // "aa" in 2 frames has no valid path (a blank must intervene), while 3
  // frames admits exactly a . a.
  CtcLabelSequence labels = CtcLabelSequence::from_chars({0, 0}, 1);
  Matrix em2(2, 2);
  for (double &x : em2.data) x = std::log(0.5);
  CtcTrellis tr2 = ctc_trellis(em2, labels);
  CHECK(tr2.total_log_prob == -kInf);

  Matrix em3(3, 2);
  for (double &x : em3.data) x = std::log(0.5);
  std::vector<int> path = ctc_best_path(em3, labels);
  CHECK(path == std::vector<int>{1, 2, 3});
}

TEST_CASE("backtrack leaves blank frames unassigned") {
  Matrix em(4, 2);
  // Frames: a . . a is forced infeasible for one char; use char blank blank blank.
  for (int t = 0; t < 4; ++t) {
    em.at(t, 0) = t == 0 ? std::log(0.9) : std::log(0.1);
    em.at(t, 1) = t == 0 ? std::log(0.1) : std::log(0.9);
  }
  CtcLabelSequence labels = CtcLabelSequence::from_chars({0}, 1);
  AlignmentMatrix hard = ctc_backtrack(ctc_trellis(em, labels), em, labels);
  CHECK(hard.values.at(0, 0) == 1.0);
  for (int t = 1; t < 4; ++t) CHECK(hard.values.at(0, t) == 0.0);
}

TEST_CASE("errors") {
  CtcLabelSequence labels = CtcLabelSequence::from_chars({0, 1, 2}, 3);
  Matrix em(2, 4);
  CHECK_THROWS_AS(ctc_trellis(em, labels), InfeasibleAlignment);

  Matrix bad(5, 2);  // alphabet too small for blank=3
  CHECK_THROWS_AS(ctc_trellis(bad, labels), ShapeError);
}

TEST_CASE("label sequence layout") {
  CtcLabelSequence labels = CtcLabelSequence::from_chars({4, 7}, 28);
  CHECK(labels.num_states() == 5);
  CHECK(labels.states == std::vector<int>{28, 4, 28, 7, 28});
  CHECK(labels.is_blank(0));
  CHECK(!labels.is_blank(1));
  CHECK(labels.is_blank(2));
}
