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

#ifndef SELFTRANS_EXPERIMENT_HPP_
#define SELFTRANS_EXPERIMENT_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "selftrans/data.hpp"
#include "selftrans/decode.hpp"
#include "selftrans/selftrain.hpp"

namespace selftrans {

struct LMSettings {
  bool enabled = true;
  int order = 3;
  double smoothing = 1.0;
};

struct FeatureSettings {
  int frame_size = 64;
  int hop = 32;
  int num_bands = 8;
};

struct ReportSettings {
  int generations = 2;
  std::vector<double> alphas{0.0, 0.25, 0.5, 0.75, 1.0};
};

// One structured experiment file. Exactly one of `manifest` and `toy` names
// the data source; `lm_text` optionally points to LM training text for a
// manifest corpus (the labeled transcripts are used otherwise).
struct ExperimentConfig {
  std::optional<std::filesystem::path> manifest;
  std::optional<std::filesystem::path> lm_text;
  std::optional<ToyCorpusConfig> toy;
  std::filesystem::path output_dir = "runs/default";
  std::uint64_t seed = 0;
  TrainConfig train;
  LMSettings lm;
  FeatureSettings features;
  ReportSettings report;

  /// Applies `seed` to the training and toy corpus seeds.
  void set_seed(std::uint64_t s);
  void validate() const;
  std::string to_json() const;
  /// Unknown keys are rejected. Relative paths are kept as written.
  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig load(const std::filesystem::path& path);
  /// Stable 16-hex-digit digest of the canonical JSON form.
  std::string hash() const;
};

struct PreparedData {
  DatasetSplit split;
  HiddenGold gold;
  std::vector<std::string> lm_text;
  std::optional<NgramLM> lm;
  const NgramLM* lm_ptr() const { return lm ? &*lm : nullptr; }
};

/// Loads or generates the corpus, extracts features for raw-sample
/// utterances, validates the split and trains the LM when enabled.
PreparedData prepare_data(const ExperimentConfig& config);

}  // namespace selftrans

#endif  // SELFTRANS_EXPERIMENT_HPP_
