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

#ifndef SELFTRANS_DECODE_HPP_
#define SELFTRANS_DECODE_HPP_

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "selftrans/common.hpp"
#include "selftrans/model.hpp"
#include "selftrans/vocab.hpp"

namespace selftrans {

// Character n-gram model with additive smoothing. Outcomes are the alphabet
// characters plus end-of-sentence; histories are padded with '^'.
class NgramLM {
 public:
  NgramLM() = default;
  NgramLM(int order, double smoothing, std::vector<char> alphabet);

  int order() const { return order_; }
  double smoothing() const { return smoothing_; }
  const std::vector<char>& alphabet() const { return alphabet_; }
  int num_outcomes() const { return static_cast<int>(alphabet_.size()) + 1; }
  int eos_outcome() const { return static_cast<int>(alphabet_.size()); }
  /// Outcome index of a character; throws ValidationError when unknown.
  int outcome_of(char c) const;

  /// log p(outcome | last order-1 characters of history).
  double log_prob(std::string_view history, int outcome) const;
  /// Log-probabilities of every outcome after `history`.
  std::vector<double> distribution(std::string_view history) const;

  /// Text format "#selftrans-ngram v1": order, smoothing and alphabet
  /// header lines followed by one `context <TAB> token <TAB> logprob` line
  /// per seen context and outcome (context and token JSON-quoted, eos
  /// written as "</s>").
  std::string serialize() const;
  static NgramLM parse(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static NgramLM load(const std::filesystem::path& path);

  friend NgramLM train_ngram_lm(const std::vector<std::string>& corpus, int order, double smoothing,
                                std::optional<std::vector<char>> alphabet);

 private:
  std::string context_key(std::string_view history) const;

  int order_ = 1;
  double smoothing_ = 1.0;
  std::vector<char> alphabet_;
  int lookup_[256] = {};
  std::map<std::string, std::vector<double>> table_;
  double unseen_log_prob_ = 0.0;
};

/// Additive-smoothed maximum likelihood estimate. The alphabet defaults to the
/// characters seen in `corpus`.
NgramLM train_ngram_lm(const std::vector<std::string>& corpus, int order, double smoothing,
                       std::optional<std::vector<char>> alphabet = std::nullopt);

/// Sum of conditional log-probabilities of every character and the final eos.
double lm_score(const NgramLM& lm, std::string_view text);

struct Hypothesis {
  std::vector<TokenId> tokens;  // characters, then eos when complete
  double score = 0.0;           // s2s_score + lm_weight * lm_score
  double s2s_score = 0.0;
  double lm_score = 0.0;
  bool complete = false;
};

struct BeamSearchOptions {
  int beam_size = 8;
  const NgramLM* lm = nullptr;
  double lm_weight = 0.3;
  /// Maximum number of characters; 0 means twice the encoder frame count.
  int max_len = 0;
};

/// Attention-decoder beam search with optional shallow fusion. Each step
/// expands every live hypothesis by every character and eos, keeps the
/// beam_size best candidates (ties broken by lexicographic token order),
/// and moves eos-terminated ones to the finished list. The best finished
/// hypothesis is returned; if none finished, the best truncated one with
/// complete = false.
Hypothesis beam_search(const TranscriberModel& model, const Matrix& features,
                       const BeamSearchOptions& options);

/// Framewise argmax, merge repeats, drop blanks.
std::vector<TokenId> greedy_ctc_decode(const Matrix& ctc_log_probs, TokenId blank_id);

/// Text of a hypothesis (eos stripped).
std::string hypothesis_text(const Vocabulary& vocab, const Hypothesis& hyp);

}  // namespace selftrans

#endif  // SELFTRANS_DECODE_HPP_
