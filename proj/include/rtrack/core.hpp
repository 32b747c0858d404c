// include/rtrack/core.hpp

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

#ifndef RTRACK_CORE_HPP_
#define RTRACK_CORE_HPP_

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "rtrack/matrix.hpp"

namespace rtrack {

enum class Orientation { TextToSpeech, SpeechToText };
enum class AlignKind { Soft, Hard };

// Alignment between m text tokens and n speech frames, in either
// orientation. Soft S2T matrices are row-stochastic; hard matrices are
// 0/1 multi-hot.
struct AlignmentMatrix {
  Matrix values;
  Orientation orientation = Orientation::TextToSpeech;
  AlignKind kind = AlignKind::Soft;

  int text_tokens() const {
    return orientation == Orientation::TextToSpeech ? values.rows : values.cols;
  }
  int speech_frames() const {
    return orientation == Orientation::TextToSpeech ? values.cols : values.rows;
  }
  // Throws InvalidMatrix if the entries violate the kind/orientation
  // invariants (negative entry, non-stochastic soft S2T row, non-binary
  // hard entry).
  void validate() const;
};

// Character sequence of the displayed text plus per-word character
// extents [c_start, c_end), disjoint and ascending.
struct CharSequence {
  std::vector<int> chars;
  std::vector<std::pair<int, int>> word_extents;

  int size() const { return static_cast<int>(chars.size()); }
  int word_count() const { return static_cast<int>(word_extents.size()); }
  void validate(int vocab_size) const;
};

// Acoustic feature frames, one row per frame.
struct FrameMatrix {
  Matrix frames;  // n x d
  double frame_duration_s = 0.04;

  int n() const { return frames.rows; }
  int dim() const { return frames.cols; }
};

struct WordSpan {
  int word_index = 0;
  double t_start = 0.0, t_end = 0.0;
  int c_start = 0, c_end = 0;
};

// Character inventory shared by the whole pipeline: 'a'..'z' map to
// 0..25, space to 26. Index 27 is the silence codebook slot used by the
// synthetic front-end; it never appears in text.
constexpr int kSpaceChar = 26;
constexpr int kSilenceCode = 27;
constexpr int kVocabSize = 28;

// Parse a prompt of lowercase words separated by single spaces into char
// indices plus per-word extents.
CharSequence make_char_sequence(const std::string &text);
std::string char_sequence_to_text(const CharSequence &cs);

// Row-wise L1 normalization. All-zero rows become uniform rather than
// NaN; a text token with no aligned frames must not poison training.
Matrix l1_normalize_rows(const Matrix &m, bool *had_zero_rows = nullptr);

// A_S2T = L1-normalize(A_T2S^T): the per-frame supervision distribution.
AlignmentMatrix to_supervision(const AlignmentMatrix &a_t2s);

// Soft -> hard by weight threshold. Rows whose max falls below theta keep
// a single 1 at their argmax (ties to the lowest index) so every row
// stays non-empty.
AlignmentMatrix threshold_to_hard(const AlignmentMatrix &soft, double theta);

// p^(1/tau) / ||p^(1/tau)||_1, computed in log space.
std::vector<double> sharpen(const std::vector<double> &p, double tau);

// TSV alignment container. Header: `#orientation=<T2S|S2T> kind=<soft|hard>
// m=<m> n=<n>`, then one row per line with 6 fractional digits.
void write_alignment_tsv(std::ostream &os, const AlignmentMatrix &a);
void write_alignment_tsv_file(const std::string &path, const AlignmentMatrix &a);
AlignmentMatrix read_alignment_tsv(std::istream &is);
AlignmentMatrix read_alignment_tsv_file(const std::string &path);

// Emission matrix files reuse the same container with an EMIT header.
void write_emission_tsv_file(const std::string &path, const Matrix &log_emissions);
Matrix read_emission_tsv_file(const std::string &path);

}  // namespace rtrack

#endif  // RTRACK_CORE_HPP_
