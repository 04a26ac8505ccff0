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

#include "selftrans/losses.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace selftrans {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

struct CtcLattice {
  std::vector<TokenId> ext;  // blank-augmented target, length 2L + 1
  Matrix alpha;              // T x S
  double log_likelihood = kNegInf;
};

CtcLattice ctc_forward(const Matrix& lp, const std::vector<TokenId>& target, TokenId blank) {
  const auto T = static_cast<int>(lp.rows());
  if (T < 1) throw ValidationError("ctc_loss: empty log-probability matrix");
  for (TokenId t : target) {
    if (t == blank) throw ValidationError("ctc_loss: target contains the blank id");
    if (t < 0 || t >= lp.cols()) throw ValidationError("ctc_loss: target id outside log-prob width");
  }
  if (blank < 0 || blank >= lp.cols()) throw ValidationError("ctc_loss: blank id outside width");
  const int need = ctc_min_frames(target);
  if (T < need)
    throw ValidationError("ctc_loss: infeasible target (" + std::to_string(target.size()) +
                          " tokens need " + std::to_string(need) + " frames, have " +
                          std::to_string(T) + ")");
  CtcLattice lat;
  lat.ext.reserve(2 * target.size() + 1);
  lat.ext.push_back(blank);
  for (TokenId t : target) {
    lat.ext.push_back(t);
    lat.ext.push_back(blank);
  }
  const auto S = static_cast<int>(lat.ext.size());
  lat.alpha = Matrix::Constant(T, S, kNegInf);
  lat.alpha(0, 0) = lp(0, blank);
  if (S > 1) lat.alpha(0, 1) = lp(0, lat.ext[1]);
  for (int t = 1; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      double a = lat.alpha(t - 1, s);
      if (s >= 1) a = log_add(a, lat.alpha(t - 1, s - 1));
      if (s >= 2 && lat.ext[s] != blank && lat.ext[s] != lat.ext[s - 2])
        a = log_add(a, lat.alpha(t - 1, s - 2));
      lat.alpha(t, s) = a == kNegInf ? kNegInf : a + lp(t, lat.ext[s]);
    }
  }
  lat.log_likelihood = lat.alpha(T - 1, S - 1);
  if (S > 1) lat.log_likelihood = log_add(lat.log_likelihood, lat.alpha(T - 1, S - 2));
  return lat;
}

}  // namespace

int ctc_min_frames(const std::vector<TokenId>& target) {
  int repeats = 0;
  for (std::size_t i = 1; i < target.size(); ++i)
    if (target[i] == target[i - 1]) ++repeats;
  return static_cast<int>(target.size()) + repeats;
}

double ctc_loss(const Matrix& log_probs, const std::vector<TokenId>& target, TokenId blank_id) {
  return -ctc_forward(log_probs, target, blank_id).log_likelihood;
}

LossWithGrad ctc_loss_with_grad(const Matrix& log_probs, const std::vector<TokenId>& target,
                                TokenId blank_id) {
  const CtcLattice lat = ctc_forward(log_probs, target, blank_id);
  const auto T = static_cast<int>(log_probs.rows());
  const auto S = static_cast<int>(lat.ext.size());
  const auto& ext = lat.ext;
  // beta(t, s): log-probability of finishing from state s at frame t,
  // excluding frame t's own emission.
  Matrix beta = Matrix::Constant(T, S, kNegInf);
  beta(T - 1, S - 1) = 0.0;
  if (S > 1) beta(T - 1, S - 2) = 0.0;
  for (int t = T - 2; t >= 0; --t) {
    for (int s = 0; s < S; ++s) {
      double b = beta(t + 1, s) + log_probs(t + 1, ext[s]);
      if (s + 1 < S) b = log_add(b, beta(t + 1, s + 1) + log_probs(t + 1, ext[s + 1]));
      if (s + 2 < S && ext[s + 2] != blank_id && ext[s + 2] != ext[s])
        b = log_add(b, beta(t + 1, s + 2) + log_probs(t + 1, ext[s + 2]));
      beta(t, s) = b;
    }
  }
  LossWithGrad out;
  out.value = -lat.log_likelihood;
  out.grad = Matrix::Zero(log_probs.rows(), log_probs.cols());
  for (int t = 0; t < T; ++t)
    for (int s = 0; s < S; ++s) {
      const double occ = lat.alpha(t, s) + beta(t, s);
      if (occ != kNegInf) out.grad(t, ext[s]) -= std::exp(occ - lat.log_likelihood);
    }
  return out;
}

LossWithGrad s2s_loss_with_grad(const Matrix& logits, const std::vector<int>& target_classes) {
  if (logits.rows() < 1 || logits.rows() != static_cast<Eigen::Index>(target_classes.size()))
    throw ValidationError("s2s_loss: " + std::to_string(logits.rows()) + " steps for " +
                          std::to_string(target_classes.size()) + " targets");
  const auto steps = static_cast<double>(logits.rows());
  LossWithGrad out;
  out.grad.resize(logits.rows(), logits.cols());
  double total = 0.0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const int cls = target_classes[static_cast<std::size_t>(r)];
    if (cls < 0 || cls >= logits.cols()) throw ValidationError("s2s_loss: target class out of range");
    const double m = logits.row(r).maxCoeff();
    const auto e = (logits.row(r).array() - m).exp();
    const double z = e.sum();
    total += m + std::log(z) - logits(r, cls);
    out.grad.row(r) = e / (z * steps);
    out.grad(r, cls) -= 1.0 / steps;
  }
  out.value = total / steps;
  return out;
}

double s2s_loss(const Matrix& logits, const std::vector<int>& target_classes) {
  return s2s_loss_with_grad(logits, target_classes).value;
}

double multitask_loss(double ctc, double s2s, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ValidationError("beta must be in [0, 1]");
  return beta * ctc + (1.0 - beta) * s2s;
}

double unified_loss(double supervised, double self_training, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("alpha must be in [0, 1]");
  return supervised + alpha * self_training;
}

BatchLossResult batch_loss(const TranscriberModel& model, const std::vector<TrainingExample>& batch,
                           double beta, double alpha, RngStream* dropout_rng) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ValidationError("beta must be in [0, 1]");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("alpha must be in [0, 1]");
  const auto& vocab = model.vocab();
  int n_sup = 0, n_st = 0;
  for (const auto& ex : batch) {
    if (ex.kind == LabelKind::kSupervised) ++n_sup;
    else if (ex.kind == LabelKind::kPseudo) ++n_st;
    else throw ValidationError("batch_loss: utterance carries neither a true nor a pseudo label");
    if (!ex.features) throw ValidationError("batch_loss: missing features");
  }
  BatchLossResult result;
  result.gradients = model.zero_gradients();
  LossBreakdown& b = result.breakdown;
  b.beta = beta;
  b.alpha = alpha;
  b.num_supervised = n_sup;
  b.num_self_training = n_st;

  for (const auto& ex : batch) {
    const bool sup = ex.kind == LabelKind::kSupervised;
    const double group_weight = sup ? 1.0 / n_sup : alpha / n_st;
    ad::Graph g;
    ModelGraph mg(g, model, &result.gradients);
    ad::Var enc = mg.encode(*ex.features, dropout_rng);
    ad::Var lp = mg.ctc_log_probs(enc);
    LossWithGrad ctc = ctc_loss_with_grad(g.value(lp), ex.target, vocab.blank_id());
    ad::Var ctc_node = g.custom_scalar(lp, ctc.value, std::move(ctc.grad));

    for (TokenId t : ex.target)
      if (!vocab.is_character(t)) throw ValidationError("batch_loss: target has a non-character id");
    ad::Var logits = mg.teacher_forced_logits(mg.memory(enc), ex.target);
    std::vector<int> classes;
    classes.reserve(ex.target.size() + 1);
    for (TokenId t : ex.target) classes.push_back(vocab.decoder_class(t));
    classes.push_back(vocab.decoder_class(vocab.eos_id()));
    LossWithGrad s2s = s2s_loss_with_grad(g.value(logits), classes);
    ad::Var s2s_node = g.custom_scalar(logits, s2s.value, std::move(s2s.grad));

    if (sup) {
      b.ctc_s += ctc.value / n_sup;
      b.s2s_s += s2s.value / n_sup;
    } else {
      b.ctc_st += ctc.value / n_st;
      b.s2s_st += s2s.value / n_st;
    }
    if (group_weight != 0.0) {
      ad::Var loss = g.weighted_sum({ctc_node, s2s_node},
                                    {group_weight * beta, group_weight * (1.0 - beta)});
      g.backward(loss);
    }
  }
  b.total = unified_loss(b.supervised(), b.self_training(), alpha);
  return result;
}

}  // namespace selftrans
