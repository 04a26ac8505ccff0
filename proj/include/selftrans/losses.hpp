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

#ifndef SELFTRANS_LOSSES_HPP_
#define SELFTRANS_LOSSES_HPP_

#include <vector>

#include "selftrans/common.hpp"
#include "selftrans/model.hpp"
#include "selftrans/vocab.hpp"

namespace selftrans {

struct LossWithGrad {
  double value = 0.0;
  Matrix grad;  // d value / d input, same shape as the input matrix
};

/// Minimum frames a CTC alignment of `target` needs: L + repeated neighbours.
int ctc_min_frames(const std::vector<TokenId>& target);

/// Negative log-likelihood of `target` under framewise `log_probs`, summed
/// over all blank-augmented alignments (log-space forward algorithm).
/// Throws ValidationError when the target cannot be aligned in T frames.
double ctc_loss(const Matrix& log_probs, const std::vector<TokenId>& target, TokenId blank_id);
/// Same value plus the gradient w.r.t. every log_probs entry (forward-backward).
LossWithGrad ctc_loss_with_grad(const Matrix& log_probs, const std::vector<TokenId>& target,
                                TokenId blank_id);

/// Mean over steps of the cross-entropy between softmax(logits row) and the
/// target class of that row.
double s2s_loss(const Matrix& logits, const std::vector<int>& target_classes);
LossWithGrad s2s_loss_with_grad(const Matrix& logits, const std::vector<int>& target_classes);

/// beta * ctc + (1 - beta) * s2s
double multitask_loss(double ctc, double s2s, double beta);
/// supervised + alpha * self_training
double unified_loss(double supervised, double self_training, double alpha);

struct LossBreakdown {
  double ctc_s = 0.0;
  double s2s_s = 0.0;
  double ctc_st = 0.0;
  double s2s_st = 0.0;
  double beta = 0.2;
  double alpha = 1.0;
  double total = 0.0;
  int num_supervised = 0;
  int num_self_training = 0;

  double supervised() const { return multitask_loss(ctc_s, s2s_s, beta); }
  double self_training() const { return multitask_loss(ctc_st, s2s_st, beta); }
};

enum class LabelKind { kSupervised, kPseudo, kNone };

struct TrainingExample {
  const Matrix* features = nullptr;  // must outlive the batch_loss call
  std::vector<TokenId> target;       // character ids, no eos
  LabelKind kind = LabelKind::kNone;
};

struct BatchLossResult {
  LossBreakdown breakdown;
  Gradients gradients;
};

/// Per-group mean of CTC and S2S losses, combined as
///   (beta ctc_s + (1 - beta) s2s_s) + alpha (beta ctc_st + (1 - beta) s2s_st)
/// with absent groups contributing 0. Gradients are of the total. Utterances
/// are processed in batch order for a fixed floating point reduction.
BatchLossResult batch_loss(const TranscriberModel& model, const std::vector<TrainingExample>& batch,
                           double beta, double alpha, RngStream* dropout_rng = nullptr);

}  // namespace selftrans

#endif  // SELFTRANS_LOSSES_HPP_
