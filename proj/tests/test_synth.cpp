// tests/test_synth.cpp

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
#include <filesystem>

#include "rtrack/errors.hpp"
#include "rtrack/synth.hpp"

using namespace rtrack;
using namespace rtrack::synth;

namespace {

std::vector<int> plan_chars(const SpokenPlan &plan) {
  std::vector<int> out;
  for (const SpokenToken &t : plan) out.push_back(t.code);
  return out;
}

}  // namespace

TEST_CASE("codebook rows are unit vectors and seed stable") {
  SynthConfig cfg;
  Matrix cb = make_codebook(cfg);
  REQUIRE(cb.rows == kVocabSize);
  REQUIRE(cb.cols == cfg.feature_dim);
  for (int r = 0; r < cb.rows; ++r) {
    double n2 = 0.0;
    for (int c = 0; c < cb.cols; ++c) n2 += cb.at(r, c) * cb.at(r, c);
    CHECK(std::sqrt(n2) == doctest::Approx(1.0));
  }
  Matrix cb2 = make_codebook(cfg);
  CHECK(max_abs_diff(cb, cb2) == 0.0);
  cfg.seed = 99;
  Matrix cb3 = make_codebook(cfg);
  CHECK(max_abs_diff(cb, cb3) > 1e-3);
}

TEST_CASE("base plan walks the prompt in order") {
  CharSequence cs = make_char_sequence("ab c");
  SpokenPlan plan = base_plan(cs);
  REQUIRE(plan.size() == 4);
  CHECK(plan[0].char_pos == 0);
  CHECK(plan[0].word_index == 0);
  CHECK(plan[2].code == kSpaceChar);
  CHECK(plan[2].word_index == -1);
  CHECK(plan[3].word_index == 1);
}

TEST_CASE("false start speaks the first half then the full word") {
  CharSequence cs = make_char_sequence("dog");
  SpokenPlan plan = base_plan(cs);
  DisfluencyEvent ev =
      inject_disfluency(plan, DisfluencyEvent::Kind::FalseStart, 0, cs);
  CHECK(ev.detail == "do");
  // d o d o g
  CHECK(plan_chars(plan) == std::vector<int>{3, 14, 3, 14, 6});
}

TEST_CASE("repeat duplicates the word with a separating pause") {
  CharSequence cs = make_char_sequence("cat dog");
  SpokenPlan plan = base_plan(cs);
  DisfluencyEvent ev =
      inject_disfluency(plan, DisfluencyEvent::Kind::Repeat, 0, cs);
  CHECK(ev.detail == "cat");
  // c a t _ c a t _ d o g
  CHECK(plan_chars(plan) ==
        std::vector<int>{2, 0, 19, kSpaceChar, 2, 0, 19, kSpaceChar, 3, 14, 6});
  std::vector<int> words;
  for (const SpokenToken &t : plan) words.push_back(t.word_index);
  CHECK(words == std::vector<int>{0, 0, 0, -1, 0, 0, 0, -1, 1, 1, 1});
}

TEST_CASE("skip removes the word block") {
  CharSequence cs = make_char_sequence("cat dog");
  SpokenPlan plan = base_plan(cs);
  DisfluencyEvent ev =
      inject_disfluency(plan, DisfluencyEvent::Kind::Skip, 1, cs);
  CHECK(ev.detail == "dog");
  CHECK(plan_chars(plan) == std::vector<int>{2, 0, 19, kSpaceChar});

  CharSequence one = make_char_sequence("cat");
  SpokenPlan p1 = base_plan(one);
  CHECK_THROWS_AS(inject_disfluency(p1, DisfluencyEvent::Kind::Skip, 0, one),
                  InvalidOperation);
}

TEST_CASE("gen_utterance is deterministic in (text, cfg, seed)") {
  SynthConfig cfg;
  Utterance a = gen_utterance("the quick fox", cfg, 42);
  Utterance b = gen_utterance("the quick fox", cfg, 42);
  CHECK(a.frames.frames.rows == b.frames.frames.rows);
  CHECK(max_abs_diff(a.frames.frames, b.frames.frames) == 0.0);
  CHECK(max_abs_diff(a.truth_t2s.values, b.truth_t2s.values) == 0.0);
  CHECK(a.frame_truth == b.frame_truth);

  Utterance c = gen_utterance("the quick fox", cfg, 43);
  bool differs = c.frames.frames.rows != a.frames.frames.rows ||
                 max_abs_diff(a.frames.frames, c.frames.frames) > 1e-9;
  CHECK(differs);
}

TEST_CASE("gen_utterance structural invariants") {
  SynthConfig cfg;
  cfg.pause_prob = 0.5;
  for (uint64_t seed : {1ULL, 7ULL, 123ULL}) {
    Utterance u = gen_utterance("abc de fgh", cfg, seed);
    int m = u.chars.size(), n = u.frames.frames.rows;
    REQUIRE(u.truth_t2s.values.rows == m);
    REQUIRE(u.truth_t2s.values.cols == n);
    CHECK_NOTHROW(u.truth_t2s.validate());
    CHECK(static_cast<int>(u.frame_truth.size()) == n);
    // Every frame belongs to at most one character; speech frames to
    // exactly one.
    for (int t = 0; t < n; ++t) {
      int active = 0;
      for (int c = 0; c < m; ++c) active += u.truth_t2s.values.at(c, t) != 0.0;
      CHECK(active == 1);  // silence frames sit on their space char
    }
    // Fluent reading: word index per frame is non-decreasing.
    int prev = -1;
    for (int w : u.frame_truth) {
      if (w < 0) continue;
      CHECK(w >= prev);
      prev = w;
    }
    // Dwell bounds without pauses give n in [2m, 6m]; pauses only add.
    CHECK(n >= cfg.dwell_min * m);
    CHECK(u.frame_truth == derive_frame_truth(u.truth_t2s, u.chars));
  }
}

TEST_CASE("forced repeat makes the frame word sequence regress") {
  SynthConfig cfg;
  cfg.pause_prob = 0.0;
  Utterance u = gen_utterance("cat dog", cfg, 5,
                              ForcedEvent{DisfluencyEvent::Kind::Repeat, 0});
  REQUIRE(u.events.size() == 1);
  CHECK(u.events[0].kind == DisfluencyEvent::Kind::Repeat);
  // 0-run, silence, 0-run again: a revisit of word 0 after a boundary.
  bool saw_gap_then_zero = false;
  bool in_gap = false;
  for (int w : u.frame_truth) {
    if (w < 0) { in_gap = true; continue; }
    if (in_gap && w == 0) saw_gap_then_zero = true;
    in_gap = false;
  }
  CHECK(saw_gap_then_zero);
}

TEST_CASE("forced skip leaves no frames on the skipped word") {
  SynthConfig cfg;
  Utterance u = gen_utterance("cat dog bird", cfg, 6,
                              ForcedEvent{DisfluencyEvent::Kind::Skip, 1});
  for (int w : u.frame_truth) CHECK(w != 1);
  // The skipped word's characters have empty truth rows.
  auto [c0, c1] = u.chars.word_extents[1];
  for (int c = c0; c < c1; ++c)
    for (int t = 0; t < u.truth_t2s.values.cols; ++t)
      CHECK(u.truth_t2s.values.at(c, t) == 0.0);
}

TEST_CASE("forced false start doubles early frames of the word") {
  SynthConfig cfg;
  cfg.pause_prob = 0.0;
  Utterance u = gen_utterance("dog", cfg, 7,
                              ForcedEvent{DisfluencyEvent::Kind::FalseStart, 0});
  // Character 0 ('d') is spoken twice, so its truth row has two runs.
  int runs = 0;
  bool active = false;
  for (int t = 0; t < u.truth_t2s.values.cols; ++t) {
    bool a = u.truth_t2s.values.at(0, t) != 0.0;
    if (a && !active) ++runs;
    active = a;
  }
  CHECK(runs == 2);
}

TEST_CASE("config validation") {
  SynthConfig cfg;
  cfg.dwell_min = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
  cfg = SynthConfig{};
  cfg.repeat_p = 0.6;
  cfg.skip_p = 0.6;
  CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
  cfg = SynthConfig{};
  cfg.noise_sigma = -0.1;
  CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
  cfg = SynthConfig{};
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("random_text stays inside the charset") {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 20; ++i) {
    std::string t = random_text(rng, 2, 5);
    CHECK_NOTHROW(make_char_sequence(t));
    CharSequence cs = make_char_sequence(t);
    CHECK(cs.word_count() >= 2);
    CHECK(cs.word_count() <= 5);
  }
}

TEST_CASE("corpus directory round trip") {
  namespace fs = std::filesystem;
  std::string dir =
      (fs::temp_directory_path() / "rtrack_synth_test_corpus").string();
  fs::remove_all(dir);

  SynthConfig cfg;
  cfg.repeat_p = 0.2;
  cfg.false_start_p = 0.2;
  cfg.skip_p = 0.1;
  std::vector<std::string> texts{"cat dog", "a bird flew", "over the wall"};
  gen_corpus(texts, cfg, dir);
  Corpus mem = gen_corpus_mem(texts, cfg);
  Corpus disk = load_corpus(dir);

  REQUIRE(disk.size() == mem.size());
  for (size_t i = 0; i < mem.size(); ++i) {
    CHECK(disk[i].id == mem[i].id);
    CHECK(disk[i].text == mem[i].text);
    REQUIRE(disk[i].frames.frames.rows == mem[i].frames.frames.rows);
    CHECK(max_abs_diff(disk[i].frames.frames, mem[i].frames.frames) < 1e-5);
    CHECK(max_abs_diff(disk[i].truth_t2s.values, mem[i].truth_t2s.values) == 0.0);
    CHECK(disk[i].frame_truth == mem[i].frame_truth);
    REQUIRE(disk[i].events.size() == mem[i].events.size());
    for (size_t e = 0; e < mem[i].events.size(); ++e) {
      CHECK(disk[i].events[e].kind == mem[i].events[e].kind);
      CHECK(disk[i].events[e].word_index == mem[i].events[e].word_index);
      CHECK(disk[i].events[e].detail == mem[i].events[e].detail);
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("gen_corpus_mem rejects an empty text list") {
  CHECK_THROWS_AS(gen_corpus_mem({}, SynthConfig{}), InvalidCorpus);
}
