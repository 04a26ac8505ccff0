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

#include "selftrans/wer.hpp"

#include <algorithm>

#include "selftrans/common.hpp"
#include "selftrans/vocab.hpp"

namespace selftrans {

EditCounts align_words(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  // cost[i][j]: distance between ref[:i] and hyp[:j]
  std::vector<std::vector<int>> cost(n + 1, std::vector<int>(m + 1, 0));
  for (std::size_t i = 0; i <= n; ++i) cost[i][0] = static_cast<int>(i);
  for (std::size_t j = 0; j <= m; ++j) cost[0][j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j) {
      const int diag = cost[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      cost[i][j] = std::min({diag, cost[i][j - 1] + 1, cost[i - 1][j] + 1});
    }
  EditCounts c;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == hyp[j - 1];
      if (cost[i][j] == cost[i - 1][j - 1] + (same ? 0 : 1)) {
        if (!same) ++c.substitutions;
        --i, --j;
        continue;
      }
    }
    if (j > 0 && cost[i][j] == cost[i][j - 1] + 1) {
      ++c.insertions;
      --j;
    } else {
      ++c.deletions;
      --i;
    }
  }
  return c;
}

WERReport word_error_rate(const std::vector<std::string>& refs, const std::vector<std::string>& hyps) {
  if (refs.size() != hyps.size())
    throw ValidationError("word_error_rate: " + std::to_string(refs.size()) + " references but " +
                          std::to_string(hyps.size()) + " hypotheses");
  if (refs.empty()) throw ValidationError("word_error_rate: no references");
  WERReport r;
  for (std::size_t k = 0; k < refs.size(); ++k) {
    const auto ref = split_words(refs[k]);
    if (ref.empty()) throw ValidationError("word_error_rate: empty reference at index " + std::to_string(k));
    const EditCounts c = align_words(ref, split_words(hyps[k]));
    r.substitutions += c.substitutions;
    r.deletions += c.deletions;
    r.insertions += c.insertions;
    r.ref_words += static_cast<int>(ref.size());
  }
  if (r.ref_words > 0)
    r.wer_percent = 100.0 * (r.substitutions + r.deletions + r.insertions) / r.ref_words;
  return r;
}

}  // namespace selftrans
