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

#ifndef SELFTRANS_EVAL_HPP_
#define SELFTRANS_EVAL_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "selftrans/data.hpp"
#include "selftrans/decode.hpp"
#include "selftrans/selftrain.hpp"
#include "selftrans/wer.hpp"

namespace selftrans {

struct AlphaRow {
  double alpha = 0.0;
  double dev_wer = 0.0;
};

struct AlphaSweepResult {
  std::vector<AlphaRow> rows;  // sorted by alpha, duplicates removed
  std::size_t best = 0;        // argmin of dev WER, first on ties
  double teacher_dev_wer = 0.0;
  int duplicates_removed = 0;
};

/// One teacher and one pseudo-label set shared by every alpha; each alpha
/// trains a student from the same fresh initialization.
AlphaSweepResult alpha_sweep(const DatasetSplit& split, std::vector<double> alphas,
                             const TrainConfig& config, const NgramLM* lm);

struct AblationRow {
  std::string variant;
  double dev_wer = 0.0;
  double test_wer = 0.0;
};

struct AblationResult {
  std::vector<AblationRow> rows;  // full, -iteration, -iteration-NoisyAug, -self-training, -self-training-SupAug
  SelfTrainingResult iterations;  // the two-generation run behind the first, second and fourth rows
};

AblationResult ablation_run(const DatasetSplit& split, const TrainConfig& config, const NgramLM* lm);

/// Fixed-width text tables; `tag` (e.g. a config hash) goes on the title line.
std::string format_alpha_table(const AlphaSweepResult& result, const std::string& tag);
std::string format_ablation_table(const std::vector<AblationRow>& rows, const std::string& tag);
std::string format_generation_table(const std::vector<GenerationReport>& reports, const std::string& tag);

/// One JSON object per line.
void write_alpha_records(const AlphaSweepResult& result, const std::string& tag,
                         const std::filesystem::path& path);
void write_ablation_records(const std::vector<AblationRow>& rows, const std::string& tag,
                            const std::filesystem::path& path);

std::string wer_report_json(const WERReport& report);
std::string generation_report_json(const GenerationReport& report);

}  // namespace selftrans

#endif  // SELFTRANS_EVAL_HPP_
