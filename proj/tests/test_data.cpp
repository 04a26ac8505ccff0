// Copyright 2026  The selftrans Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "selftrans/data.hpp"
#include "selftrans/vocab.hpp"

using namespace selftrans;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("selftrans_test_data_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

Utterance utt(const std::string& id, double duration, std::optional<std::string> text = std::nullopt) {
  Utterance u;
  u.id = id;
  u.features = Matrix::Ones(2, 2);
  u.duration_s = duration;
  u.transcript = std::move(text);
  return u;
}

}  // namespace

TEST_CASE("vocabulary layout and specials") {
  const Vocabulary v = build_vocabulary({"ab", "ba"});
  CHECK(v.num_characters() == 2);
  CHECK(v.size() == 6);
  CHECK(v.blank_id() == 0);
  CHECK(v.id_of('a') == 1);
  CHECK(v.id_of('b') == 2);
  CHECK(v.eos_id() == 3);
  CHECK(v.sos_id() == 4);
  CHECK(v.pad_id() == 5);
  CHECK(v.ctc_width() == 3);
  CHECK(v.decoder_width() == 3);
  CHECK(v.decoder_token(v.decoder_class(v.eos_id())) == v.eos_id());
}

TEST_CASE("vocabulary keeps space as a token") {
  const Vocabulary v = build_vocabulary({"a a"});
  CHECK(v.characters() == std::vector<char>{' ', 'a'});
  CHECK(v.size() == 6);
}

TEST_CASE("vocabulary serialization is deterministic and round-trips") {
  const Vocabulary a = build_vocabulary({"hello world", "it's"});
  const Vocabulary b = build_vocabulary({"it's", "hello world"});
  CHECK(a.to_json() == b.to_json());
  CHECK(Vocabulary::from_json(a.to_json()) == a);
}

TEST_CASE("vocabulary encode/decode round trip") {
  const Vocabulary v = build_vocabulary({"the quick brown fox's"});
  const std::string text = "fox the quick";
  CHECK(v.decode(v.encode(text)) == text);
  std::vector<TokenId> ids{1, 3, 2, 5};
  CHECK(v.encode(v.decode(ids)) == ids);
  CHECK(v.decode({1, v.eos_id()}) == std::string(1, v.char_of(1)));
  CHECK_THROWS_AS(v.encode("z"), ValidationError);
  CHECK_THROWS_AS(v.decode({v.blank_id()}), ValidationError);
}

TEST_CASE("vocabulary errors") {
  CHECK_THROWS_AS(build_vocabulary({}), ValidationError);
  CHECK_THROWS_AS(Vocabulary(std::vector<char>{'a', 'a'}), ValidationError);
}

TEST_CASE("transcript normalization") {
  CHECK(normalize_transcript("  Hello,  World!! ") == "hello world");
  CHECK(normalize_transcript("Don't\tStop") == "don't stop");
  CHECK(split_words("a  b c ") == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("empty manifest gives four empty lists") {
  const fs::path dir = scratch("empty");
  write(dir / "m.tsv", "#selftrans-manifest v1\n");
  const LoadedCorpus c = load_manifest(dir / "m.tsv");
  CHECK(c.split.total() == 0);
  CHECK(c.gold.size() == 0);
}

TEST_CASE("single labeled record") {
  const fs::path dir = scratch("single");
  write(dir / "m.tsv", "#selftrans-manifest v1\nu1\tlabeled\t1.5\tinline:2x2:1,2,3,4\thello\n");
  const LoadedCorpus c = load_manifest(dir / "m.tsv");
  REQUIRE(c.split.labeled.size() == 1);
  CHECK(c.split.unlabeled.empty());
  CHECK(c.split.dev.empty());
  CHECK(c.split.test.empty());
  CHECK(*c.split.labeled[0].transcript == "hello");
  CHECK(c.split.labeled[0].features(1, 0) == 3.0);
}

TEST_CASE("manifest rejects labeled/unlabeled overlap and duplicates") {
  const fs::path dir = scratch("overlap");
  write(dir / "a.tsv",
        "#selftrans-manifest v1\nu1\tlabeled\t1\tinline:1x1:0\thi\nu1\tunlabeled\t1\tinline:1x1:0\t\n");
  CHECK_THROWS_AS(load_manifest(dir / "a.tsv"), ValidationError);
  write(dir / "b.tsv", "#selftrans-manifest v1\nu1\tdev\t1\tinline:1x1:0\thi\nu1\ttest\t1\tinline:1x1:0\thi\n");
  CHECK_THROWS_AS(load_manifest(dir / "b.tsv"), ValidationError);
}

TEST_CASE("manifest parse errors name the line") {
  const fs::path dir = scratch("bad");
  write(dir / "m.tsv", "#selftrans-manifest v1\nu1\tlabeled\t1\tinline:1x1:0\thi\nu2\tlabeled\tnotanumber\tinline:1x1:0\thi\n");
  try {
    load_manifest(dir / "m.tsv");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
  write(dir / "h.tsv", "not a header\n");
  CHECK_THROWS_AS(load_manifest(dir / "h.tsv"), ParseError);
  CHECK_THROWS(load_manifest(dir / "missing.tsv"));
}

TEST_CASE("manifest hides unlabeled transcripts") {
  const fs::path dir = scratch("hidden");
  write(dir / "m.tsv", "#selftrans-manifest v1\nu1\tlabeled\t1\tinline:1x1:0\thi\nu2\tunlabeled\t1\tinline:1x1:0\tsecret\n");
  const LoadedCorpus c = load_manifest(dir / "m.tsv");
  REQUIRE(c.split.unlabeled.size() == 1);
  CHECK_FALSE(c.split.unlabeled[0].transcript.has_value());
  CHECK(c.gold.access_count() == 0);
  CHECK(c.gold.transcript_for_evaluation("u2") == "secret");
  CHECK(c.gold.access_count() == 1);
}

TEST_CASE("matrix files round-trip through the manifest") {
  const fs::path dir = scratch("matrix");
  Matrix m(3, 2);
  m << 1, 2, 3, 4, 5, 6.25;
  write_matrix_file(dir / "a.stmx", m);
  MatrixKind kind{};
  CHECK(read_matrix_file(dir / "a.stmx", &kind) == m);
  CHECK(kind == MatrixKind::kFeatures);
  write_manifest(dir / "m.tsv", {{"u1", Role::kDev, 0.03, "a.stmx", "ok"}});
  const LoadedCorpus c = load_manifest(dir / "m.tsv");
  REQUIRE(c.split.dev.size() == 1);
  CHECK(c.split.dev[0].features == m);
}

TEST_CASE("duration filter keeps the boundary") {
  DatasetSplit s;
  s.labeled = {utt("a", 10, "x"), utt("b", 28, "x"), utt("c", 28.5, "x")};
  FilterCounts removed;
  const DatasetSplit f = filter_by_duration(s, 28.0, &removed);
  REQUIRE(f.labeled.size() == 2);
  CHECK(f.labeled[0].id == "a");
  CHECK(f.labeled[1].id == "b");
  CHECK(removed.labeled == 1);
}

TEST_CASE("duration filter no-op, total removal and idempotence") {
  DatasetSplit s;
  s.labeled = {utt("a", 3, "x")};
  s.unlabeled = {utt("b", 30), utt("c", 50)};
  s.dev = {utt("d", 40, "y")};
  FilterCounts removed;
  CHECK(filter_by_duration(s, 1000.0, &removed).total() == s.total());
  CHECK(removed.total() == 0);
  const DatasetSplit none = filter_by_duration(s, 1.0, &removed);
  CHECK(none.total() == 0);
  CHECK(removed.total() == s.total());
  const DatasetSplit once = filter_by_duration(s, 35.0);
  const DatasetSplit twice = filter_by_duration(once, 35.0);
  CHECK(once.total() == 2);
  CHECK(twice.total() == once.total());
}

TEST_CASE("split validation") {
  DatasetSplit s;
  s.labeled = {utt("a", 1, "x")};
  s.unlabeled = {utt("a", 1)};
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s.unlabeled = {utt("b", 1)};
  CHECK_NOTHROW(s.validate());
  s.dev = {utt("c", 1)};
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s.dev = {utt("c", 0.0, "x")};
  CHECK_THROWS_AS(s.validate(), ValidationError);
}

TEST_CASE("noiseless toy rendering is the exact prototype concatenation") {
  ToyCorpusConfig c;
  c.noise_std = 0.0;
  c.frames_per_token_jitter = 0;
  c.frames_per_token_mean = 3;
  c.num_channels = 4;
  RngStream rng(1, "render");
  const Matrix m = render_toy_features("ab", {'a', 'b'}, c, rng);
  Matrix expected = Matrix::Zero(6, 4);
  expected.block(0, 0, 3, 1).setOnes();
  expected.block(3, 1, 3, 1).setOnes();
  CHECK(m == expected);
}

TEST_CASE("toy corpus counts, determinism and disjointness") {
  ToyCorpusConfig c;
  c.num_labeled = 20;
  c.num_unlabeled = 80;
  c.num_dev = 10;
  c.num_test = 10;
  c.num_lm_sentences = 5;
  const ToyCorpus a = generate_toy_corpus(c);
  const ToyCorpus b = generate_toy_corpus(c);
  CHECK(a.split.labeled.size() == 20);
  CHECK(a.split.unlabeled.size() == 80);
  CHECK(a.split.dev.size() == 10);
  CHECK(a.split.test.size() == 10);
  CHECK(a.gold.size() == 80);
  CHECK(a.lm_text.size() == 5);
  CHECK_NOTHROW(a.split.validate());
  for (std::size_t i = 0; i < a.split.unlabeled.size(); ++i) {
    CHECK_FALSE(a.split.unlabeled[i].transcript.has_value());
    CHECK(a.split.unlabeled[i].features == b.split.unlabeled[i].features);
  }
  CHECK(a.split.labeled[3].transcript == b.split.labeled[3].transcript);
  c.seed = 9;
  const ToyCorpus d = generate_toy_corpus(c);
  CHECK(d.split.labeled[0].features != a.split.labeled[0].features);
}

TEST_CASE("toy config validation") {
  ToyCorpusConfig c;
  c.frames_per_token_jitter = c.frames_per_token_mean;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.num_dev = -1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.noise_std = -0.1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.transcript_length_range = {0, 2};
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("written toy corpus loads back") {
  ToyCorpusConfig c;
  c.num_labeled = 4;
  c.num_unlabeled = 6;
  c.num_dev = 2;
  c.num_test = 2;
  c.num_lm_sentences = 3;
  const ToyCorpus t = generate_toy_corpus(c);
  const fs::path dir = scratch("toywrite");
  write_toy_corpus(t, dir);
  const LoadedCorpus back = load_manifest(dir / "manifest.tsv");
  CHECK(back.split.labeled.size() == 4);
  CHECK(back.split.unlabeled.size() == 6);
  CHECK(back.gold.size() == 6);
  CHECK(back.split.labeled[1].features == t.split.labeled[1].features);
  CHECK(back.gold.entries_for_evaluation() == t.gold.entries_for_evaluation());
}
