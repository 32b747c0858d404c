// src/core.cpp

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

#include "rtrack/core.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <fstream>
#include <iostream>
#include <sstream>

#include "rtrack/errors.hpp"

namespace rtrack {

namespace {
constexpr double kStochasticTol = 1e-6;
}

void AlignmentMatrix::validate() const {
  for (double x : values.data) {
    if (!(x >= 0.0))
      throw InvalidMatrix("negative or NaN entry in alignment matrix");
    if (kind == AlignKind::Hard && x != 0.0 && x != 1.0)
      throw InvalidMatrix("hard alignment entry not in {0,1}");
  }
  if (kind == AlignKind::Soft && orientation == Orientation::SpeechToText) {
    for (int r = 0; r < values.rows; ++r) {
      double s = 0.0;
      for (int c = 0; c < values.cols; ++c) s += values.at(r, c);
      if (std::fabs(s - 1.0) > kStochasticTol)
        throw InvalidMatrix("soft S2T row " + std::to_string(r) +
                            " sums to " + std::to_string(s));
    }
  }
}

void CharSequence::validate(int vocab_size) const {
  for (int c : chars)
    if (c < 0 || c >= vocab_size)
      throw InvalidInput("character index out of vocabulary range");
  int prev_end = 0;
  for (const auto &[s, e] : word_extents) {
    if (s < prev_end || e <= s || e > size())
      throw InvalidInput("word extents must be disjoint, ascending, in range");
    prev_end = e;
  }
}

CharSequence make_char_sequence(const std::string &text) {
  if (text.empty()) throw InvalidInput("empty text");
  CharSequence cs;
  int word_start = -1;
  for (size_t i = 0; i < text.size(); ++i) {
    char ch = text[i];
    if (ch >= 'a' && ch <= 'z') {
      if (word_start < 0) word_start = static_cast<int>(i);
      cs.chars.push_back(ch - 'a');
    } else if (ch == ' ') {
      if (word_start >= 0) {
        cs.word_extents.emplace_back(word_start, static_cast<int>(i));
        word_start = -1;
      }
      cs.chars.push_back(kSpaceChar);
    } else {
      throw InvalidInput("text must be lowercase words separated by spaces");
    }
  }
  if (word_start >= 0)
    cs.word_extents.emplace_back(word_start, static_cast<int>(text.size()));
  if (cs.word_extents.empty()) throw InvalidInput("text contains no words");
  cs.validate(kVocabSize);
  return cs;
}

std::string char_sequence_to_text(const CharSequence &cs) {
  std::string s;
  for (int c : cs.chars) s += c == kSpaceChar ? ' ' : static_cast<char>('a' + c);
  return s;
}

Matrix l1_normalize_rows(const Matrix &m, bool *had_zero_rows) {
  if (had_zero_rows) *had_zero_rows = false;
  Matrix out = m;
  for (int r = 0; r < m.rows; ++r) {
    double s = 0.0;
    for (int c = 0; c < m.cols; ++c) {
      double x = m.at(r, c);
      if (x < 0.0 || !std::isfinite(x))
        throw InvalidMatrix("negative entry at row " + std::to_string(r));
      s += x;
    }
    if (s == 0.0) {
      if (had_zero_rows) *had_zero_rows = true;
      const double u = 1.0 / m.cols;
      for (int c = 0; c < m.cols; ++c) out.at(r, c) = u;
    } else {
      for (int c = 0; c < m.cols; ++c) out.at(r, c) /= s;
    }
  }
  return out;
}

AlignmentMatrix to_supervision(const AlignmentMatrix &a_t2s) {
  if (a_t2s.orientation != Orientation::TextToSpeech)
    throw OrientationError("to_supervision expects a TextToSpeech matrix");
  bool zero_rows = false;
  AlignmentMatrix out;
  out.values = l1_normalize_rows(transpose(a_t2s.values), &zero_rows);
  out.orientation = Orientation::SpeechToText;
  out.kind = AlignKind::Soft;
  if (zero_rows)
    std::cerr << "[core] warning: all-zero supervision row(s) mapped to uniform\n";
  return out;
}

AlignmentMatrix threshold_to_hard(const AlignmentMatrix &soft, double theta) {
  if (soft.kind != AlignKind::Soft)
    throw InvalidMatrix("threshold_to_hard expects a soft matrix");
  if (!(theta > 0.0 && theta < 1.0))
    throw InvalidThreshold("theta must lie in (0,1)");
  AlignmentMatrix out;
  out.orientation = soft.orientation;
  out.kind = AlignKind::Hard;
  out.values = Matrix(soft.values.rows, soft.values.cols);
  for (int r = 0; r < soft.values.rows; ++r) {
    int active = 0;
    int argmax = 0;
    for (int c = 0; c < soft.values.cols; ++c) {
      if (soft.values.at(r, c) >= theta) {
        out.values.at(r, c) = 1.0;
        ++active;
      }
      if (soft.values.at(r, c) > soft.values.at(r, argmax)) argmax = c;
    }
    if (active == 0) out.values.at(r, argmax) = 1.0;
  }
  return out;
}

std::vector<double> sharpen(const std::vector<double> &p, double tau) {
  if (!(tau > 0.0)) throw InvalidTemperature("tau must be positive");
  double s = 0.0;
  for (double x : p) {
    if (x < 0.0) throw InvalidMatrix("probability entry is negative");
    s += x;
  }
  if (std::fabs(s - 1.0) > kStochasticTol)
    throw InvalidMatrix("input does not sum to 1");
  // Work with log p / tau to avoid underflow of p^(1/tau).
  std::vector<double> logs(p.size());
  for (size_t i = 0; i < p.size(); ++i)
    logs[i] = p[i] > 0.0 ? std::log(p[i]) / tau
                         : -std::numeric_limits<double>::infinity();
  double lse = logsumexp(logs.data(), static_cast<int>(logs.size()));
  std::vector<double> out(p.size());
  for (size_t i = 0; i < p.size(); ++i) out[i] = std::exp(logs[i] - lse);
  return out;
}

namespace {

const char *orient_tag(Orientation o) {
  return o == Orientation::TextToSpeech ? "T2S" : "S2T";
}

void write_matrix_rows(std::ostream &os, const Matrix &m) {
  char buf[32];
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) {
      std::snprintf(buf, sizeof(buf), "%.6f", m.at(r, c));
      if (c) os << '\t';
      os << buf;
    }
    os << '\n';
  }
}

Matrix read_matrix_rows(std::istream &is, int rows, int cols) {
  Matrix m(rows, cols);
  std::string line;
  for (int r = 0; r < rows; ++r) {
    if (!std::getline(is, line))
      throw ParseError("alignment file truncated at row " + std::to_string(r));
    std::istringstream ls(line);
    std::string cell;
    for (int c = 0; c < cols; ++c) {
      if (!std::getline(ls, cell, '\t'))
        throw ParseError("short row " + std::to_string(r));
      m.at(r, c) = std::stod(cell);
    }
  }
  return m;
}

}  // namespace

void write_alignment_tsv(std::ostream &os, const AlignmentMatrix &a) {
  os << "#orientation=" << orient_tag(a.orientation)
     << " kind=" << (a.kind == AlignKind::Soft ? "soft" : "hard")
     << " m=" << a.text_tokens() << " n=" << a.speech_frames() << '\n';
  write_matrix_rows(os, a.values);
}

void write_alignment_tsv_file(const std::string &path, const AlignmentMatrix &a) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path + " for writing");
  write_alignment_tsv(os, a);
  if (!os) throw IoError("write failed: " + path);
}

AlignmentMatrix read_alignment_tsv(std::istream &is) {
  std::string header;
  if (!std::getline(is, header) || header.rfind("#orientation=", 0) != 0)
    throw ParseError("missing alignment header");
  AlignmentMatrix a;
  int m = -1, n = -1;
  std::istringstream hs(header.substr(1));
  std::string field;
  while (hs >> field) {
    auto eq = field.find('=');
    if (eq == std::string::npos) throw ParseError("bad header field: " + field);
    std::string key = field.substr(0, eq), val = field.substr(eq + 1);
    if (key == "orientation") {
      if (val == "T2S") a.orientation = Orientation::TextToSpeech;
      else if (val == "S2T") a.orientation = Orientation::SpeechToText;
      else throw ParseError("bad orientation: " + val);
    } else if (key == "kind") {
      if (val == "soft") a.kind = AlignKind::Soft;
      else if (val == "hard") a.kind = AlignKind::Hard;
      else throw ParseError("bad kind: " + val);
    } else if (key == "m") m = std::stoi(val);
    else if (key == "n") n = std::stoi(val);
    else throw ParseError("unknown header key: " + key);
  }
  if (m < 0 || n < 0) throw ParseError("header missing m/n");
  int rows = a.orientation == Orientation::TextToSpeech ? m : n;
  int cols = a.orientation == Orientation::TextToSpeech ? n : m;
  a.values = read_matrix_rows(is, rows, cols);
  return a;
}

AlignmentMatrix read_alignment_tsv_file(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  return read_alignment_tsv(is);
}

void write_emission_tsv_file(const std::string &path, const Matrix &log_emissions) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os << "#orientation=EMIT rows=" << log_emissions.rows
     << " cols=" << log_emissions.cols << '\n';
  write_matrix_rows(os, log_emissions);
  if (!os) throw IoError("write failed: " + path);
}

Matrix read_emission_tsv_file(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  std::string header;
  if (!std::getline(is, header) || header.rfind("#orientation=EMIT", 0) != 0)
    throw ParseError("missing EMIT header in " + path);
  int rows = -1, cols = -1;
  std::istringstream hs(header);
  std::string field;
  while (hs >> field) {
    auto eq = field.find('=');
    if (eq == std::string::npos) continue;
    std::string key = field.substr(0, eq), val = field.substr(eq + 1);
    if (key == "rows") rows = std::stoi(val);
    else if (key == "cols") cols = std::stoi(val);
  }
  if (rows < 0 || cols < 0) throw ParseError("EMIT header missing rows/cols");
  return read_matrix_rows(is, rows, cols);
}

}  // namespace rtrack
