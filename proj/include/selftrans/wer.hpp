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

#ifndef SELFTRANS_WER_HPP_
#define SELFTRANS_WER_HPP_

#include <string>
#include <vector>

namespace selftrans {

struct EditCounts {
  int substitutions = 0;
  int deletions = 0;
  int insertions = 0;
  int errors() const { return substitutions + deletions + insertions; }
};

struct WERReport {
  int substitutions = 0;
  int deletions = 0;
  int insertions = 0;
  int ref_words = 0;
  double wer_percent = 0.0;
};

/// Unit-cost word alignment. On equal-cost backtrace choices a substitution
/// (or match) is preferred over an insertion, and an insertion over a
/// deletion; the total is always the minimum edit distance.
EditCounts align_words(const std::vector<std::string>& ref, const std::vector<std::string>& hyp);

/// Corpus-level WER: counts are pooled over all utterances before dividing
/// by the pooled reference length.
WERReport word_error_rate(const std::vector<std::string>& refs, const std::vector<std::string>& hyps);

}  // namespace selftrans

#endif  // SELFTRANS_WER_HPP_
