// src/metrics.cpp

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

#include "rtrack/metrics.hpp"

#include <algorithm>
#include <map>

#include "rtrack/errors.hpp"

namespace rtrack::metrics {

SpanScores span_metrics(const SpanPair &p) {
  if (!(p.t1 < p.t2)) throw InvalidSpan("ground truth span must have t1 < t2");
  if (!(p.th1 <= p.th2)) throw InvalidSpan("predicted span must have th1 <= th2");
  double intersection = std::max(std::min(p.t2, p.th2) - std::max(p.t1, p.th1), 0.0);
  double uni = (p.t2 - p.t1) + (p.th2 - p.th1) - intersection;
  SpanScores s;
  s.pr = p.th2 > p.th1 ? intersection / (p.th2 - p.th1) : 0.0;
  s.re = intersection / (p.t2 - p.t1);
  s.ja = uni > 0.0 ? intersection / uni : 0.0;
  return s;
}

SpanScores corpus_alignment_report(const std::vector<SpanPair> &pairs) {
  if (pairs.empty()) throw InvalidInput("no span pairs to aggregate");
  SpanScores mean;
  for (const SpanPair &p : pairs) {
    SpanScores s = span_metrics(p);
    mean.pr += s.pr;
    mean.re += s.re;
    mean.ja += s.ja;
  }
  mean.pr /= pairs.size();
  mean.re /= pairs.size();
  mean.ja /= pairs.size();
  return mean;
}

std::vector<std::optional<WordSpan>> word_spans_from_t2s(
    const AlignmentMatrix &t2s, const CharSequence &chars,
    double frame_duration_s) {
  if (t2s.orientation != Orientation::TextToSpeech)
    throw OrientationError("word spans need a T2S matrix");
  if (t2s.text_tokens() != chars.size())
    throw ShapeError("alignment rows do not match text length");
  const Matrix &m = t2s.values;
  std::vector<std::optional<WordSpan>> out;
  for (int w = 0; w < chars.word_count(); ++w) {
    auto [c0, c1] = chars.word_extents[w];
    int first = -1, last = -1;
    for (int c = c0; c < c1; ++c)
      for (int t = 0; t < m.cols; ++t)
        if (m.at(c, t) != 0.0) {
          if (first < 0 || t < first) first = t;
          if (t > last) last = t;
        }
    if (first < 0) {
      out.push_back(std::nullopt);
      continue;
    }
    WordSpan span;
    span.word_index = w;
    span.c_start = c0;
    span.c_end = c1;
    span.t_start = first * frame_duration_s;
    span.t_end = (last + 1) * frame_duration_s;
    out.push_back(span);
  }
  return out;
}

double frame_word_accuracy(const std::vector<int> &predicted_words,
                           const std::vector<int> &truth_words) {
  if (predicted_words.size() != truth_words.size())
    throw ShapeError("prediction/truth frame counts differ");
  long correct = 0, scored = 0;
  for (size_t i = 0; i < truth_words.size(); ++i) {
    if (truth_words[i] < 0) continue;
    ++scored;
    if (predicted_words[i] == truth_words[i]) ++correct;
  }
  if (scored == 0) throw NoScoredFrames("all frames are silence");
  return static_cast<double>(correct) / scored;
}

double frame_word_f1(const std::vector<int> &predicted_words,
                     const std::vector<int> &truth_words) {
  if (predicted_words.size() != truth_words.size())
    throw ShapeError("prediction/truth frame counts differ");
  std::map<int, long> truth_n, pred_n, correct_n;
  long scored = 0;
  for (size_t i = 0; i < truth_words.size(); ++i) {
    if (truth_words[i] < 0) continue;
    ++scored;
    ++truth_n[truth_words[i]];
    ++pred_n[predicted_words[i]];
    if (predicted_words[i] == truth_words[i]) ++correct_n[truth_words[i]];
  }
  if (scored == 0) throw NoScoredFrames("all frames are silence");
  double f1_sum = 0.0;
  for (const auto &[word, tn] : truth_n) {
    long pn = pred_n.count(word) ? pred_n.at(word) : 0;
    long cn = correct_n.count(word) ? correct_n.at(word) : 0;
    double pr = pn > 0 ? static_cast<double>(cn) / pn : 0.0;
    double re = static_cast<double>(cn) / tn;
    f1_sum += pr + re > 0.0 ? 2.0 * pr * re / (pr + re) : 0.0;
  }
  return f1_sum / truth_n.size();
}

}  // namespace rtrack::metrics
