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

#include <string>
#include <vector>

#include "oracles.hpp"
#include "selftrans/common.hpp"
#include "selftrans/rng.hpp"
#include "selftrans/vocab.hpp"
#include "selftrans/wer.hpp"

using namespace selftrans;

namespace {

std::string join(const std::vector<std::string>& words) {
  std::string s;
  for (std::size_t i = 0; i < words.size(); ++i) s += (i ? " " : "") + words[i];
  return s;
}

std::vector<std::string> random_words(RngStream& rng, int max_len) {
  static const char* pool[] = {"a", "b", "c", "ab", "ba"};
  std::vector<std::string> w(static_cast<std::size_t>(rng.uniform_int(0, max_len)));
  for (auto& x : w) x = pool[rng.uniform_int(0, 4)];
  return w;
}

}  // namespace

TEST_CASE("wer examples") {
  const WERReport same = word_error_rate({"hello world"}, {"hello world"});
  CHECK(same.wer_percent == 0.0);
  CHECK(same.ref_words == 2);

  const WERReport empty = word_error_rate({"hello world"}, {""});
  CHECK(empty.deletions == 2);
  CHECK(empty.wer_percent == 100.0);

  const WERReport mixed = word_error_rate({"a b c"}, {"a x c d"});
  CHECK(mixed.substitutions == 1);
  CHECK(mixed.insertions == 1);
  CHECK(mixed.deletions == 0);
  CHECK(mixed.wer_percent == doctest::Approx(200.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("wer pools counts over the corpus") {
  // 1 error over 1 word and 0 errors over 3 words: pooled 25%, not a 50% mean
  const WERReport r = word_error_rate({"a", "b c d"}, {"x", "b c d"});
  CHECK(r.ref_words == 4);
  CHECK(r.wer_percent == doctest::Approx(25.0).epsilon(1e-12));
}

TEST_CASE("wer input errors") {
  CHECK_THROWS_AS(word_error_rate({"a"}, {}), ValidationError);
  CHECK_THROWS_AS(word_error_rate({"a", "  "}, {"a", "b"}), ValidationError);
  CHECK_THROWS_AS(word_error_rate({}, {}), ValidationError);
}

TEST_CASE("whitespace handling") {
  const WERReport r = word_error_rate({"  a\tb  "}, {"a   b"});
  CHECK(r.wer_percent == 0.0);
  CHECK(r.ref_words == 2);
}

TEST_CASE("alignment matches exhaustive edit search") {
  RngStream rng(3, "wer-pairs");
  int mismatches = 0;
  for (int n = 0; n < 200; ++n) {
    std::vector<std::string> ref = random_words(rng, 8);
    if (ref.empty()) ref.push_back("a");
    const std::vector<std::string> hyp = random_words(rng, 8);
    const EditCounts c = align_words(ref, hyp);
    const int expected = oracle::edit_distance_by_search(ref, hyp);
    if (c.errors() != expected) ++mismatches;
    // Counts must also be consistent with the two lengths.
    CHECK(static_cast<int>(ref.size()) - c.deletions + c.insertions == static_cast<int>(hyp.size()));
    const WERReport r = word_error_rate({join(ref)}, {join(hyp)});
    CHECK(r.substitutions + r.deletions + r.insertions == expected);
  }
  CHECK(mismatches == 0);
}

TEST_CASE("split words") {
  CHECK(split_words("") == std::vector<std::string>{});
  CHECK(split_words(" x  yz ") == std::vector<std::string>{"x", "yz"});
}
