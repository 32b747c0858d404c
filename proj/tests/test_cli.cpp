// tests/test_cli.cpp

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

// Drives the installed binary through std::system. The binary path comes
// from the RTRACK_CLI environment variable set by ctest.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string cli() {
  const char *p = std::getenv("RTRACK_CLI");
  REQUIRE(p != nullptr);
  return p;
}

std::string work_dir() {
  static std::string dir = [] {
    std::string d = (fs::temp_directory_path() / "rtrack_cli_test").string();
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(const std::string &args, const std::string &log_name = "log") {
  std::string cmd = cli() + " " + args + " > " + work_dir() + "/" + log_name +
                    ".out 2> " + work_dir() + "/" + log_name + ".err";
  int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

std::string slurp(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string out_of(const std::string &log_name) {
  return slurp(work_dir() + "/" + log_name + ".out");
}

}  // namespace

TEST_CASE("missing required flag exits 2 with a usage message") {
  CHECK(run("gen --random-texts 3", "gen_noout") == 2);
  CHECK(slurp(work_dir() + "/gen_noout.err").find("--out") !=
        std::string::npos);
}

TEST_CASE("unknown subcommand exits 2") {
  CHECK(run("frobnicate", "badsub") == 2);
}

TEST_CASE("gen writes a corpus and reruns byte-identically") {
  std::string c1 = work_dir() + "/corpus1", c2 = work_dir() + "/corpus2";
  std::string flags =
      " --random-texts 3 --min-words 2 --max-words 4 --seed 7 --repeat-p 0.2";
  CHECK(run("gen --out " + c1 + flags, "gen1") == 0);
  CHECK(run("gen --out " + c2 + flags, "gen2") == 0);
  CHECK(slurp(c1 + "/manifest.jsonl") == slurp(c2 + "/manifest.jsonl"));
  CHECK(slurp(c1 + "/meta.json") == slurp(c2 + "/meta.json"));
  // Per-utterance seeds recorded in the manifest.
  std::istringstream mf(slurp(c1 + "/manifest.jsonl"));
  std::string line;
  int lines = 0;
  while (std::getline(mf, line)) {
    json j = json::parse(line);
    CHECK(j.contains("seed"));
    CHECK(j.contains("text"));
    std::string id = j.at("id").get<std::string>();
    CHECK(slurp(c1 + "/frames/" + id + ".rtrk") ==
          slurp(c2 + "/frames/" + id + ".rtrk"));
    CHECK(slurp(c1 + "/truth/" + id + ".tsv") ==
          slurp(c2 + "/truth/" + id + ".tsv"));
    ++lines;
  }
  CHECK(lines == 3);
}

TEST_CASE("config file keys merge and unknown keys are rejected") {
  std::string good = work_dir() + "/gen_good.cfg";
  {
    std::ofstream f(good);
    f << "random-texts=2\nmin-words=2\nmax-words=3\nseed=9\n";
  }
  CHECK(run("gen --config " + good + " --out " + work_dir() + "/corpus_cfg",
            "gencfg") == 0);
  CHECK(fs::exists(work_dir() + "/corpus_cfg/manifest.jsonl"));

  std::string bad = work_dir() + "/gen_bad.cfg";
  {
    std::ofstream f(bad);
    f << "random-texts=2\nno-such-key=1\n";
  }
  CHECK(run("gen --config " + bad + " --out " + work_dir() + "/corpus_bad",
            "genbad") == 2);
}

TEST_CASE("oracle alignment reports perfect scores") {
  std::string corpus = work_dir() + "/corpus1";
  std::string out = work_dir() + "/align_oracle";
  CHECK(run("align --method oracle --corpus " + corpus + " --out " + out,
            "aligno") == 0);
  json report = json::parse(out_of("aligno"));
  CHECK(report.at("Pr").get<double>() == doctest::Approx(1.0));
  CHECK(report.at("Re").get<double>() == doctest::Approx(1.0));
  CHECK(report.at("Ja").get<double>() == doctest::Approx(1.0));
  // Hard TSVs carry the hard kind header.
  std::istringstream mf(slurp(corpus + "/manifest.jsonl"));
  std::string line;
  std::getline(mf, line);
  std::string id = json::parse(line).at("id").get<std::string>();
  std::string header = slurp(out + "/hard/" + id + ".tsv");
  CHECK(header.find("kind=hard") != std::string::npos);
  CHECK(header.rfind("#orientation=T2S", 0) == 0);
}

TEST_CASE("eval align on truth copies gives an all-ones report") {
  std::string corpus = work_dir() + "/corpus1";
  std::string pred = work_dir() + "/align_oracle/hard";
  CHECK(run("eval --kind align --pred " + pred + " --truth " + corpus,
            "evala") == 0);
  json report = json::parse(out_of("evala"));
  CHECK(report.at("pr").get<double>() == doctest::Approx(1.0));
  CHECK(report.at("re").get<double>() == doctest::Approx(1.0));
  CHECK(report.at("ja").get<double>() == doctest::Approx(1.0));
  CHECK(report.at("n_words").get<int>() > 0);
  CHECK(report.at("acc").is_null());
}

TEST_CASE("invalid enum values exit 2") {
  std::string corpus = work_dir() + "/corpus1";
  CHECK(run("train --stage tracker --signal sideways --corpus " + corpus +
                " --out " + work_dir() + "/x.ckpt --oracle --epochs 1",
            "badsig") == 2);
  CHECK(run("train --stage warp --corpus " + corpus + " --out " +
                work_dir() + "/x.ckpt",
            "badstage") == 2);
  CHECK(run("align --method teleport --corpus " + corpus + " --out " +
                work_dir() + "/y",
            "badmethod") == 2);
  CHECK(run("eval --kind vibes --pred x --truth " + corpus, "badkind") == 2);
}

TEST_CASE("missing corpus directory exits 3") {
  CHECK(run("align --method oracle --corpus " + work_dir() +
                "/no_such_dir --out " + work_dir() + "/z",
            "nocorpus") == 3);
}

TEST_CASE("tracker trains, tracks, and evaluates through the CLI") {
  std::string corpus = work_dir() + "/corpus1";
  std::string ckpt = work_dir() + "/tracker.ckpt";
  CHECK(run("train --stage tracker --signal hard --oracle --corpus " + corpus +
                " --out " + ckpt + " --epochs 2 --holdout 0 --seed 5",
            "trktrain") == 0);
  CHECK(fs::exists(ckpt));
  // The sidecar manifest records the training signal.
  json meta = json::parse(slurp(ckpt + ".json"));
  CHECK(meta.at("stage").get<std::string>() == "tracker");
  CHECK(meta.at("signal").get<std::string>() == "hard");

  std::string jsonl = work_dir() + "/track.jsonl";
  std::string csv = work_dir() + "/track.csv";
  CHECK(run("track --model " + ckpt + " --corpus " + corpus + " --out " +
                jsonl + " --csv " + csv + " --tau 0.1",
            "trkrun") == 0);
  std::istringstream records(slurp(jsonl));
  std::string line;
  int n_records = 0;
  while (std::getline(records, line)) {
    json j = json::parse(line);
    CHECK(j.contains("utterance"));
    CHECK(j.contains("t"));
    CHECK(j.contains("word"));
    CHECK(j.contains("score"));
    CHECK(j.at("dist_top5").is_array());
    ++n_records;
  }
  CHECK(n_records > 0);
  CHECK(slurp(csv).rfind("utterance,frame,word", 0) == 0);

  CHECK(run("eval --kind track --pred " + jsonl + " --truth " + corpus +
                " --pyramid-factor 4",
            "evalt") == 0);
  json report = json::parse(out_of("evalt"));
  CHECK(report.at("acc").is_number());
  CHECK(report.at("f1").is_number());
  CHECK(report.at("n_frames").get<int>() == n_records);
  CHECK(report.at("pr").is_null());

  // Wrong pyramid factor is a data validation failure naming the id.
  CHECK(run("eval --kind track --pred " + jsonl + " --truth " + corpus +
                " --pyramid-factor 2",
            "evalbad") == 4);
  CHECK(slurp(work_dir() + "/evalbad.err").find("utt_") != std::string::npos);

  // Rerun with the same seed reproduces the checkpoint bit for bit.
  std::string ckpt2 = work_dir() + "/tracker2.ckpt";
  CHECK(run("train --stage tracker --signal hard --oracle --corpus " + corpus +
                " --out " + ckpt2 + " --epochs 2 --holdout 0 --seed 5",
            "trktrain2") == 0);
  CHECK(slurp(ckpt) == slurp(ckpt2));
}

TEST_CASE("track with an unknown utterance id exits 2") {
  std::string corpus = work_dir() + "/corpus1";
  std::string ckpt = work_dir() + "/tracker.ckpt";
  CHECK(run("track --model " + ckpt + " --corpus " + corpus +
                " --utterance utt_99999",
            "badutt") == 2);
}
