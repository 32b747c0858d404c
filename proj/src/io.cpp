// src/io.cpp

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

#include "rtrack/io.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>

#include <json.hpp>

#include "rtrack/errors.hpp"

namespace rtrack {

namespace {

void put_u16(std::ostream &os, uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  os.write(b, 2);
}
void put_u32(std::ostream &os, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}
uint16_t get_u16(std::istream &is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char *>(b), 2);
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}
uint32_t get_u32(std::istream &is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char *>(b), 4);
  return static_cast<uint32_t>(b[0] | (b[1] << 8) | (b[2] << 16) |
                               (static_cast<uint32_t>(b[3]) << 24));
}

constexpr uint16_t kCheckpointVersion = 1;

}  // namespace

void write_frames_blob(const std::string &path, const Matrix &frames) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os.write("RTRK", 4);
  put_u32(os, static_cast<uint32_t>(frames.rows));
  put_u32(os, static_cast<uint32_t>(frames.cols));
  for (double x : frames.data) {
    float f = static_cast<float>(x);
    static_assert(sizeof(float) == 4);
    char b[4];
    std::memcpy(b, &f, 4);
    os.write(b, 4);
  }
  if (!os) throw IoError("write failed: " + path);
}

Matrix read_frames_blob(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "RTRK", 4) != 0)
    throw ParseError("bad frames magic in " + path);
  uint32_t rows = get_u32(is), cols = get_u32(is);
  Matrix m(static_cast<int>(rows), static_cast<int>(cols));
  for (double &x : m.data) {
    char b[4];
    is.read(b, 4);
    float f;
    std::memcpy(&f, b, 4);
    x = static_cast<double>(f);
  }
  if (!is) throw ParseError("truncated frames blob: " + path);
  return m;
}

void save_checkpoint(const std::string &path,
                     const std::vector<nn::Param *> &params,
                     const std::string &meta_json) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os.write("RTNN", 4);
  put_u16(os, kCheckpointVersion);
  for (const nn::Param *p : params) {
    put_u16(os, static_cast<uint16_t>(p->name.size()));
    os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    uint8_t rank = p->value.rows == 1 ? 1 : 2;
    os.put(static_cast<char>(rank));
    if (rank == 1) {
      put_u32(os, static_cast<uint32_t>(p->value.cols));
    } else {
      put_u32(os, static_cast<uint32_t>(p->value.rows));
      put_u32(os, static_cast<uint32_t>(p->value.cols));
    }
    for (double x : p->value.data) {
      char b[8];
      std::memcpy(b, &x, 8);
      os.write(b, 8);
    }
  }
  if (!os) throw IoError("write failed: " + path);
  std::ofstream ms(path + ".json");
  if (!ms) throw IoError("cannot open " + path + ".json for writing");
  ms << meta_json << '\n';
}

void load_checkpoint(const std::string &path,
                     const std::vector<nn::Param *> &params) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "RTNN", 4) != 0)
    throw ParseError("bad checkpoint magic in " + path);
  uint16_t version = get_u16(is);
  if (version != kCheckpointVersion)
    throw ParseError("unsupported checkpoint version");
  std::map<std::string, Matrix> loaded;
  while (true) {
    int peek = is.peek();
    if (peek == EOF) break;
    uint16_t name_len = get_u16(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    uint8_t rank = static_cast<uint8_t>(is.get());
    uint32_t rows = 1, cols;
    if (rank == 1) {
      cols = get_u32(is);
    } else if (rank == 2) {
      rows = get_u32(is);
      cols = get_u32(is);
    } else {
      throw ParseError("bad param rank in " + path);
    }
    Matrix m(static_cast<int>(rows), static_cast<int>(cols));
    for (double &x : m.data) {
      char b[8];
      is.read(b, 8);
      std::memcpy(&x, b, 8);
    }
    if (!is) throw ParseError("truncated checkpoint: " + path);
    loaded.emplace(std::move(name), std::move(m));
  }
  for (nn::Param *p : params) {
    auto it = loaded.find(p->name);
    if (it == loaded.end())
      throw ParseError("checkpoint missing param " + p->name);
    if (!it->second.same_shape(p->value))
      throw ShapeError("checkpoint shape mismatch for " + p->name);
    p->value = it->second;
    p->zero_grad();
  }
}

std::string load_checkpoint_meta(const std::string &path) {
  std::ifstream ms(path + ".json");
  if (!ms) throw IoError("cannot open " + path + ".json");
  std::string all((std::istreambuf_iterator<char>(ms)),
                  std::istreambuf_iterator<char>());
  return all;
}

const char *to_string(DisfluencyEvent::Kind k) {
  switch (k) {
    case DisfluencyEvent::Kind::Repeat: return "repeat";
    case DisfluencyEvent::Kind::FalseStart: return "false_start";
    case DisfluencyEvent::Kind::Skip: return "skip";
  }
  return "?";
}

DisfluencyEvent::Kind disfluency_kind_from_string(const std::string &s) {
  if (s == "repeat") return DisfluencyEvent::Kind::Repeat;
  if (s == "false_start") return DisfluencyEvent::Kind::FalseStart;
  if (s == "skip") return DisfluencyEvent::Kind::Skip;
  throw ParseError("unknown disfluency kind: " + s);
}

std::vector<int> derive_frame_truth(const AlignmentMatrix &truth_t2s,
                                    const CharSequence &chars) {
  if (truth_t2s.orientation != Orientation::TextToSpeech)
    throw OrientationError("frame truth needs a T2S matrix");
  const Matrix &m = truth_t2s.values;
  std::vector<int> char_to_word(chars.size(), -1);
  for (int w = 0; w < chars.word_count(); ++w)
    for (int c = chars.word_extents[w].first; c < chars.word_extents[w].second;
         ++c)
      char_to_word[c] = w;
  std::vector<int> out(m.cols, -1);
  for (int t = 0; t < m.cols; ++t) {
    for (int i = 0; i < m.rows; ++i) {
      if (m.at(i, t) != 0.0) {
        out[t] = char_to_word[i];
        break;
      }
    }
  }
  return out;
}

Corpus load_corpus(const std::string &dir) {
  std::ifstream mf(dir + "/manifest.jsonl");
  if (!mf) throw IoError("cannot open " + dir + "/manifest.jsonl");
  Corpus corpus;
  std::string line;
  while (std::getline(mf, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception &e) {
      throw ParseError("bad manifest line: " + std::string(e.what()));
    }
    Utterance u;
    u.id = j.at("id").get<std::string>();
    u.text = j.at("text").get<std::string>();
    u.seed = j.at("seed").get<uint64_t>();
    u.chars = make_char_sequence(u.text);
    u.frames.frames = read_frames_blob(dir + "/" + j.at("frames_file").get<std::string>());
    u.frames.frame_duration_s = j.value("frame_duration_s", 0.01);
    u.truth_t2s = read_alignment_tsv_file(dir + "/" + j.at("truth_file").get<std::string>());
    if (u.truth_t2s.text_tokens() != u.chars.size() ||
        u.truth_t2s.speech_frames() != u.frames.n())
      throw ShapeError("truth/frames mismatch for utterance " + u.id);
    for (const auto &ev : j.value("events", nlohmann::json::array())) {
      DisfluencyEvent e;
      e.kind = disfluency_kind_from_string(ev.at("kind").get<std::string>());
      e.word_index = ev.at("word_index").get<int>();
      e.detail = ev.value("detail", "");
      u.events.push_back(std::move(e));
    }
    u.frame_truth = derive_frame_truth(u.truth_t2s, u.chars);
    corpus.push_back(std::move(u));
  }
  if (corpus.empty()) throw InvalidCorpus("no utterances in " + dir);
  return corpus;
}

std::vector<int> downsample_frame_truth(const std::vector<int> &frame_truth,
                                        int factor) {
  int n = static_cast<int>(frame_truth.size());
  int t_out = (n + factor - 1) / factor;
  std::vector<int> out(t_out, -1);
  for (int w = 0; w < t_out; ++w) {
    int lo = w * factor, hi = std::min((w + 1) * factor, n);
    std::map<int, int> counts;
    for (int i = lo; i < hi; ++i)
      if (frame_truth[i] >= 0) ++counts[frame_truth[i]];
    int best = -1, best_n = 0;
    for (const auto &[word, cnt] : counts)
      if (cnt > best_n) {  // map order breaks ties toward the lower index
        best = word;
        best_n = cnt;
      }
    out[w] = best;
  }
  return out;
}

void split_corpus(const Corpus &corpus, double holdout_fraction,
                  std::vector<const Utterance *> &train,
                  std::vector<const Utterance *> &heldout) {
  train.clear();
  heldout.clear();
  const uint64_t buckets = 1000;
  auto cut = static_cast<uint64_t>(holdout_fraction * buckets);
  for (const Utterance &u : corpus) {
    uint64_t h = std::hash<std::string>{}(u.id);
    if (h % buckets < cut)
      heldout.push_back(&u);
    else
      train.push_back(&u);
  }
}

}  // namespace rtrack
