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

#ifndef SELFTRANS_SELFTRAIN_HPP_
#define SELFTRANS_SELFTRAIN_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "selftrans/data.hpp"
#include "selftrans/decode.hpp"
#include "selftrans/features.hpp"
#include "selftrans/losses.hpp"
#include "selftrans/model.hpp"
#include "selftrans/wer.hpp"

namespace selftrans {

struct TrainConfig {
  int epochs = 10;
  int batch_size = 2;
  /// Pseudo-labeled utterances per step; 0 uses batch_size.
  int pseudo_batch_size = 0;
  /// Optimizer steps per epoch; 0 means one pass over the larger of the
  /// labeled and pseudo-labeled pools.
  int steps_per_epoch = 0;
  double beta = 0.2;
  double alpha = 1.0;
  double learning_rate = 1e-3;
  int lr_halve_patience = 1;
  /// The learning rate never drops below learning_rate * lr_floor_ratio.
  double lr_floor_ratio = 1.0 / 64.0;
  /// Global gradient-norm clip; 0 disables clipping.
  double grad_clip = 5.0;
  std::uint64_t seed = 0;
  AugmentationPolicy sup_augmentation;
  AugmentationPolicy noisy_augmentation;
  int beam_size = 8;
  double lm_weight = 0.3;
  double max_utt_duration_s = 28.0;
  /// Architecture sizes. input_dim and vocab are filled from the labeled data
  /// when left at their defaults (vocabulary without characters).
  ModelConfig model;

  void validate() const;
};

struct StepRecord {
  int epoch = 0;
  int step = 0;  // global step index, from 0
  LossBreakdown loss;
};

struct EpochRecord {
  int epoch = 0;  // from 1
  double dev_wer = 0.0;
  double learning_rate = 0.0;
  double mean_total_loss = 0.0;
};

struct TrainResult {
  explicit TrainResult(TranscriberModel m) : model(std::move(m)) {}
  TranscriberModel model;  // best-dev checkpoint
  std::vector<EpochRecord> epochs;
  std::vector<StepRecord> steps;
  int best_epoch = 0;  // 0 when no epoch ran
  double best_dev_wer = -1.0;
};

struct PseudoLabel {
  std::string transcript;
  double score = 0.0;
};

struct PseudoLabelSet {
  std::map<std::string, PseudoLabel> entries;
  int generation = 1;
  std::string teacher_id;
  int dropped_empty = 0;

  /// Line-delimited "id <TAB> transcript <TAB> score", sorted by id.
  void save(const std::filesystem::path& path) const;
};

/// Model config for a split: sizes from config.model, input width from the
/// labeled features, vocabulary from the labeled transcripts unless preset,
/// init seed derived from config.seed.
ModelConfig resolve_model_config(const DatasetSplit& split, const TrainConfig& config);

/// Hypothesis text for every utterance (clean features, beam search + LM).
std::vector<std::string> decode_utterances(const TranscriberModel& model,
                                           const std::vector<Utterance>& utts, const NgramLM* lm,
                                           int beam_size, double lm_weight);
/// WER of beam-search output against the transcripts of `utts`.
WERReport evaluate_wer(const TranscriberModel& model, const std::vector<Utterance>& utts,
                       const NgramLM* lm, int beam_size, double lm_weight);

/// Teacher training on true labels with the supervised objective.
TrainResult train_supervised(const DatasetSplit& split, const TrainConfig& config, const NgramLM* lm);

/// Clean-input beam search over every unlabeled utterance. The decode length
/// is capped so that every pseudo label stays CTC-feasible under the
/// strongest speed perturbation of config.noisy_augmentation.
PseudoLabelSet pseudo_label(const TranscriberModel& teacher, const std::vector<Utterance>& unlabeled,
                            const NgramLM* lm, const TrainConfig& config, int generation = 1,
                            std::string teacher_id = "");

/// Student training from `init` on the unified semi-supervised objective.
/// Labeled batches use config.sup_augmentation, pseudo-labeled batches use
/// config.noisy_augmentation.
TrainResult train_semi(const TranscriberModel& init, const DatasetSplit& split,
                       const PseudoLabelSet& pseudo, const TrainConfig& config, const NgramLM* lm);

struct GenerationReport {
  int generation = 0;
  double dev_wer = 0.0;
  double test_wer = 0.0;
  int pseudo_label_count = 0;
  int dropped_empty = 0;
  int best_epoch = 0;
  std::string loss_log;  // path of the training log, filled by callers that write one
};

struct GenerationResult {
  GenerationReport report;
  TrainResult training;
  std::optional<PseudoLabelSet> pseudo;
};

struct SelfTrainingResult {
  std::vector<GenerationResult> generations;  // [0] is the supervised teacher
  std::size_t best_generation = 0;
  const TranscriberModel& final_model() const { return generations[best_generation].training.model; }
  std::vector<GenerationReport> reports() const;
};

/// Generation 0 trains the teacher; each later generation relabels the
/// unlabeled pool with the previous generation's model and trains a student
/// from a fresh initialization. The final model has the best dev WER.
SelfTrainingResult self_training_iterations(const DatasetSplit& split, int n_generations,
                                            const TrainConfig& config, const NgramLM* lm);

}  // namespace selftrans

#endif  // SELFTRANS_SELFTRAIN_HPP_
