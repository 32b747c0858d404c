// include/rtrack/metrics.hpp

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

#ifndef RTRACK_METRICS_HPP_
#define RTRACK_METRICS_HPP_

#include <optional>
#include <vector>

#include "rtrack/core.hpp"

namespace rtrack::metrics {

struct SpanPair {
  double t1 = 0.0, t2 = 0.0;    // ground truth start/end, seconds
  double th1 = 0.0, th2 = 0.0;  // predicted start/end
};

struct SpanScores {
  double pr = 0.0, re = 0.0, ja = 0.0;
};

// intersection = max(min(t2, th2) - max(t1, th1), 0); Ja/Pr/Re per the
// interval-overlap ratios. A zero-length prediction scores Pr = 0.
SpanScores span_metrics(const SpanPair &p);

// Unweighted mean over word tokens.
SpanScores corpus_alignment_report(const std::vector<SpanPair> &pairs);

// Word spans from a hard T2S matrix: a word runs from its first to last
// active frame over its character extent. Words with no active frame
// (skipped, or empty predictions) come back empty.
std::vector<std::optional<WordSpan>> word_spans_from_t2s(
    const AlignmentMatrix &t2s, const CharSequence &chars,
    double frame_duration_s);

// Frame-level tracking scores. truth entries of -1 mark silence and are
// excluded from scoring.
double frame_word_accuracy(const std::vector<int> &predicted_words,
                           const std::vector<int> &truth_words);

// Per-word-type F1 over frames, macro-averaged across word types that
// appear in the truth.
double frame_word_f1(const std::vector<int> &predicted_words,
                     const std::vector<int> &truth_words);

}  // namespace rtrack::metrics

#endif  // RTRACK_METRICS_HPP_
