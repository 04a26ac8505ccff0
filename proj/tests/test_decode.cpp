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

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "selftrans/decode.hpp"
#include "selftrans/model.hpp"
#include "test_util.hpp"

using namespace selftrans;
using testutil::random_matrix;
using testutil::randomized_model;
using testutil::tiny_config;

namespace {

double prob_sum(const std::vector<double>& lp) {
  double s = 0.0;
  for (double v : lp) s += std::exp(v);
  return s;
}

// Step-by-step argmax decoding, independent of the beam bookkeeping.
std::vector<TokenId> greedy_decode(const TranscriberModel& model, const Matrix& features, int max_len) {
  const Vocabulary& vocab = model.vocab();
  const AttentionMemory memory = prepare_memory(model, encode(model, features));
  DecoderState state = initial_decoder_state(model, memory.frames());
  std::vector<TokenId> out;
  TokenId prev = vocab.sos_id();
  for (int step = 0; step <= max_len; ++step) {
    StepOutput so = decoder_step(model, state, prev, memory);
    int best = vocab.decoder_class(vocab.eos_id());
    if (step < max_len) so.logits.row(0).maxCoeff(&best);
    prev = vocab.decoder_token(best);
    out.push_back(prev);
    if (prev == vocab.eos_id()) break;
    state = so.state;
  }
  return out;
}

}  // namespace

TEST_CASE("ngram conditionals are normalized") {
  const NgramLM lm = train_ngram_lm({"ab ba", "abc", "c a b"}, 3, 0.5);
  for (const std::string h : {"", "a", "ab", "  "}) CHECK(std::abs(prob_sum(lm.distribution(h)) - 1.0) <= 1e-9);
  CHECK(std::abs(prob_sum(lm.distribution("cc")) - 1.0) <= 1e-9);  // unseen context
}

TEST_CASE("ngram dominant transition") {
  const NgramLM lm = train_ngram_lm({"aaaa"}, 2, 1.0);
  const auto d = lm.distribution("a");
  CHECK(d[static_cast<std::size_t>(lm.outcome_of('a'))] > d[static_cast<std::size_t>(lm.eos_outcome())]);
}

TEST_CASE("unigram counts plus smoothing") {
  const NgramLM lm = train_ngram_lm({"aab", "b"}, 1, 1.0);
  // counts: a 2, b 2, eos 2; with smoothing 1 over 3 outcomes -> 3/9 each
  CHECK(lm.log_prob("", lm.outcome_of('a')) == doctest::Approx(std::log(3.0 / 9.0)).epsilon(1e-12));
  const NgramLM lm2 = train_ngram_lm({"aaab"}, 1, 0.5);
  // a 3, b 1, eos 1; total 5 + 1.5
  CHECK(lm2.log_prob("xyz", lm2.outcome_of('b')) == doctest::Approx(std::log(1.5 / 6.5)).epsilon(1e-12));
}

TEST_CASE("ngram errors") {
  CHECK_THROWS_AS(train_ngram_lm({}, 2, 1.0), ValidationError);
  CHECK_THROWS_AS(train_ngram_lm({"ab"}, 0, 1.0), ValidationError);
  CHECK_THROWS_AS(train_ngram_lm({"ab"}, 2, 0.0), ValidationError);
  const NgramLM lm = train_ngram_lm({"ab"}, 2, 1.0);
  CHECK_THROWS_AS(lm_score(lm, "abz"), ValidationError);
}

TEST_CASE("lm score chain rule") {
  const NgramLM lm = train_ngram_lm({"abab", "ba", "aab"}, 2, 0.3);
  CHECK(lm_score(lm, "") == doctest::Approx(lm.log_prob("", lm.eos_outcome())).epsilon(1e-15));
  const double manual =
      lm.log_prob("", lm.outcome_of('a')) + lm.log_prob("a", lm.outcome_of('b')) + lm.log_prob("ab", lm.eos_outcome());
  CHECK(lm_score(lm, "ab") == doctest::Approx(manual).epsilon(1e-15));
  // Partial sums never increase as the text grows.
  double partial = 0.0;
  const std::string s = "abba";
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double next = partial + lm.log_prob(s.substr(0, i), lm.outcome_of(s[i]));
    CHECK(next <= partial);
    partial = next;
  }
}

TEST_CASE("ngram serialization round trip") {
  const NgramLM lm = train_ngram_lm({"a b", "ab\"c", "ba"}, 3, 0.25);
  const NgramLM back = NgramLM::parse(lm.serialize());
  CHECK(back.order() == 3);
  CHECK(back.alphabet() == lm.alphabet());
  for (const std::string h : {"", "a", " b", "\"c", "cc"})
    CHECK(back.distribution(h) == lm.distribution(h));
  const auto path = std::filesystem::temp_directory_path() / "selftrans_test_lm.txt";
  lm.save(path);
  CHECK(NgramLM::load(path).serialize() == lm.serialize());
  std::filesystem::remove(path);
  CHECK_THROWS_AS(NgramLM::parse("#wrong header\n"), ParseError);
}

TEST_CASE("greedy ctc collapse") {
  auto one_hot_path = [](const std::vector<int>& path, int V) {
    Matrix m = Matrix::Constant(static_cast<int>(path.size()), V, -5.0);
    for (std::size_t t = 0; t < path.size(); ++t) m(static_cast<int>(t), path[t]) = -0.01;
    return m;
  };
  CHECK(greedy_ctc_decode(one_hot_path({0, 1, 1, 0, 2}, 3), 0) == std::vector<TokenId>{1, 2});
  CHECK(greedy_ctc_decode(one_hot_path({0, 0, 0}, 3), 0).empty());
  CHECK(greedy_ctc_decode(one_hot_path({1, 0, 1}, 3), 0) == std::vector<TokenId>{1, 1});
}

TEST_CASE("beam of one is greedy decoding") {
  for (int n = 0; n < 20; ++n) {
    const TranscriberModel model = randomized_model(tiny_config("abc", 3, 30 + n), 300 + n);
    const Matrix x = random_matrix(5, 3, 400 + n);
    BeamSearchOptions opt;
    opt.beam_size = 1;
    opt.max_len = 4;
    CHECK(beam_search(model, x, opt).tokens == greedy_decode(model, x, 4));
  }
}

TEST_CASE("full-width beam equals exhaustive search") {
  const NgramLM lm = train_ngram_lm({"abc", "cab", "aa", "b"}, 2, 0.5);
  for (int n = 0; n < 20; ++n) {
    const TranscriberModel model = randomized_model(tiny_config("abc", 3, 50 + n), 500 + n);
    const Matrix x = random_matrix(4, 3, 600 + n);
    BeamSearchOptions opt;
    opt.beam_size = 108;
    opt.max_len = 3;
    const bool with_lm = n % 2 == 1;
    opt.lm = with_lm ? &lm : nullptr;
    opt.lm_weight = with_lm ? 0.7 : 0.0;
    const Hypothesis hyp = beam_search(model, x, opt);
    const oracle::ScoredSequence best = oracle::best_sequence_by_enumeration(model, x, 3, opt.lm, opt.lm_weight);
    CHECK(hyp.tokens == best.tokens);
    CHECK(hyp.score == doctest::Approx(best.score).epsilon(1e-10));
    CHECK(hyp.complete);
    CHECK(hyp.score == doctest::Approx(hyp.s2s_score + opt.lm_weight * hyp.lm_score).epsilon(1e-12));
  }
}

TEST_CASE("zero lm weight ignores the lm") {
  const NgramLM lm = train_ngram_lm({"abc", "ccc"}, 2, 1.0);
  const TranscriberModel model = randomized_model(tiny_config(), 77);
  const Matrix x = random_matrix(6, 3, 78);
  BeamSearchOptions a;
  a.beam_size = 4;
  a.lm_weight = 0.0;
  BeamSearchOptions b = a;
  b.lm = &lm;
  const Hypothesis ha = beam_search(model, x, a), hb = beam_search(model, x, b);
  CHECK(ha.tokens == hb.tokens);
  CHECK(ha.score == hb.score);
  CHECK(ha.score == ha.s2s_score);
}

TEST_CASE("beam search is deterministic and validates options") {
  const TranscriberModel model = randomized_model(tiny_config(), 90);
  const Matrix x = random_matrix(6, 3, 91);
  BeamSearchOptions opt;
  opt.beam_size = 5;
  const Hypothesis a = beam_search(model, x, opt), b = beam_search(model, x, opt);
  CHECK(a.tokens == b.tokens);
  CHECK(a.score == b.score);
  opt.beam_size = 0;
  CHECK_THROWS_AS(beam_search(model, x, opt), ValidationError);
  opt.beam_size = 2;
  opt.max_len = -1;
  CHECK_THROWS_AS(beam_search(model, x, opt), ValidationError);
}

TEST_CASE("length cap closes hypotheses with eos") {
  TranscriberModel model = randomized_model(tiny_config(), 92);
  Matrix& out_b = model.parameters()[model.index_of("out.b")].value;
  out_b(0, model.vocab().decoder_class(model.vocab().eos_id())) = -1e6;
  BeamSearchOptions opt;
  opt.beam_size = 3;
  opt.max_len = 2;
  const Hypothesis h = beam_search(model, random_matrix(5, 3, 93), opt);
  CHECK(h.tokens.size() == 3u);
  CHECK(h.tokens.back() == model.vocab().eos_id());
  CHECK(h.score < -1e5);
}

TEST_CASE("hypothesis text strips eos") {
  const Vocabulary v(std::vector<char>{' ', 'a', 'b'});
  Hypothesis h;
  h.tokens = {v.id_of('a'), v.id_of(' '), v.id_of('b'), v.eos_id()};
  CHECK(hypothesis_text(v, h) == "a b");
}
