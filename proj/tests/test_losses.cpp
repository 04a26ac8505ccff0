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

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "selftrans/common.hpp"
#include "selftrans/losses.hpp"
#include "selftrans/rng.hpp"
#include "test_util.hpp"

using namespace selftrans;
using testutil::random_log_probs;
using testutil::random_matrix;
using testutil::tiny_config;

namespace {

struct MixedBatch {
  std::vector<Matrix> feats;
  std::vector<TrainingExample> batch;
};

// Two true-label and two pseudo-label utterances over "abc".
MixedBatch mixed_batch(std::uint64_t seed) {
  MixedBatch b;
  const std::vector<std::vector<TokenId>> targets{{1, 2}, {3}, {2, 2}, {1, 3, 1}};
  for (std::size_t i = 0; i < targets.size(); ++i)
    b.feats.push_back(random_matrix(6 + static_cast<int>(i), 3, seed + i));
  for (std::size_t i = 0; i < targets.size(); ++i)
    b.batch.push_back({&b.feats[i], targets[i], i < 2 ? LabelKind::kSupervised : LabelKind::kPseudo});
  return b;
}

double max_abs_diff(const Gradients& a, const Gradients& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, (a[k] - b[k]).cwiseAbs().maxCoeff());
  return m;
}

}  // namespace

TEST_CASE("ctc single frame") {
  const Matrix lp = random_log_probs(1, 4, 3);
  CHECK(ctc_loss(lp, {2}, 0) == doctest::Approx(-lp(0, 2)).epsilon(1e-12));
}

TEST_CASE("ctc two uniform frames") {
  const Matrix lp = Matrix::Constant(2, 3, -std::log(3.0));
  CHECK(ctc_loss(lp, {1}, 0) == doctest::Approx(-std::log(3.0 / 9.0)).epsilon(1e-12));
}

TEST_CASE("ctc matches path enumeration") {
  RngStream rng(11, "ctc-instances");
  double worst = 0.0;
  for (int n = 0; n < 100; ++n) {
    const int V = static_cast<int>(rng.uniform_int(2, 4));
    const int L = static_cast<int>(rng.uniform_int(1, 3));
    std::vector<TokenId> target;
    for (int i = 0; i < L; ++i) target.push_back(static_cast<TokenId>(rng.uniform_int(1, V - 1)));
    const int T = static_cast<int>(rng.uniform_int(std::min(6, ctc_min_frames(target)), 6));
    if (T < ctc_min_frames(target)) continue;
    const Matrix lp = random_log_probs(T, V, 100 + n);
    worst = std::max(worst, std::abs(ctc_loss(lp, target, 0) - oracle::ctc_by_enumeration(lp, target, 0)));
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("ctc infeasible target is an error") {
  const Matrix lp = random_log_probs(2, 3, 1);
  CHECK(ctc_min_frames({1, 1}) == 3);
  CHECK_THROWS_AS(ctc_loss(lp, {1, 1}, 0), ValidationError);
  CHECK_THROWS_AS(ctc_loss(lp, {1, 2, 1}, 0), ValidationError);
  CHECK_NOTHROW(ctc_loss(lp, {1, 2}, 0));
}

TEST_CASE("ctc gradient matches finite differences") {
  const Matrix lp = random_log_probs(5, 4, 21);
  const std::vector<TokenId> target{1, 3, 3};
  const LossWithGrad lg = ctc_loss_with_grad(lp, target, 0);
  CHECK(lg.value == doctest::Approx(ctc_loss(lp, target, 0)).epsilon(1e-12));
  const double h = 1e-6;
  for (int t = 0; t < lp.rows(); ++t)
    for (int v = 0; v < lp.cols(); ++v) {
      Matrix up = lp, down = lp;
      up(t, v) += h;
      down(t, v) -= h;
      const double num = (ctc_loss(up, target, 0) - ctc_loss(down, target, 0)) / (2 * h);
      CHECK(lg.grad(t, v) == doctest::Approx(num).epsilon(1e-6).scale(1.0));
    }
}

TEST_CASE("s2s loss") {
  SUBCASE("perfect prediction") {
    Matrix logits = Matrix::Constant(3, 4, -1e4);
    logits(0, 1) = logits(1, 3) = logits(2, 0) = 0.0;
    CHECK(s2s_loss(logits, {1, 3, 0}) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  }
  SUBCASE("uniform") {
    CHECK(s2s_loss(Matrix::Zero(4, 10), {0, 9, 5, 2}) == doctest::Approx(std::log(10.0)).epsilon(1e-12));
  }
  SUBCASE("hand computed two steps") {
    Matrix logits(2, 3);
    logits << 1.0, 2.0, 3.0, 0.5, -0.5, 0.0;
    const double ce0 = -std::log(std::exp(2.0) / (std::exp(1.0) + std::exp(2.0) + std::exp(3.0)));
    const double ce1 = -std::log(std::exp(0.5) / (std::exp(0.5) + std::exp(-0.5) + std::exp(0.0)));
    CHECK(std::abs(s2s_loss(logits, {1, 0}) - 0.5 * (ce0 + ce1)) <= 1e-8);
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(s2s_loss(Matrix::Zero(2, 3), {0}), ValidationError);
    CHECK_THROWS_AS(s2s_loss(Matrix::Zero(1, 3), {3}), ValidationError);
  }
}

TEST_CASE("multitask and unified combinations") {
  CHECK(multitask_loss(5.0, 10.0, 0.0) == 10.0);
  CHECK(multitask_loss(5.0, 10.0, 1.0) == 5.0);
  CHECK(multitask_loss(5.0, 10.0, 0.2) == doctest::Approx(9.0).epsilon(1e-15));
  CHECK(unified_loss(2.0, 3.0, 0.0) == 2.0);
  CHECK(unified_loss(2.0, 3.0, 1.0) == 5.0);
  CHECK(unified_loss(2.0, 0.0, 0.7) == 2.0);
  CHECK_THROWS_AS(multitask_loss(1, 1, -0.1), ValidationError);
  CHECK_THROWS_AS(multitask_loss(1, 1, 1.5), ValidationError);
  CHECK_THROWS_AS(unified_loss(1, 1, 1.01), ValidationError);
  // Linear in the weight: three collinear points.
  const double b0 = multitask_loss(4.0, 7.0, 0.1), b1 = multitask_loss(4.0, 7.0, 0.4),
               b2 = multitask_loss(4.0, 7.0, 0.7);
  CHECK(b1 - b0 == doctest::Approx(b2 - b1).epsilon(1e-12));
  const double a0 = unified_loss(4.0, 7.0, 0.1), a1 = unified_loss(4.0, 7.0, 0.4),
               a2 = unified_loss(4.0, 7.0, 0.7);
  CHECK(a1 - a0 == doctest::Approx(a2 - a1).epsilon(1e-12));
}

TEST_CASE("batch loss groups") {
  const TranscriberModel model = testutil::randomized_model(tiny_config(), 5, 0.5);
  MixedBatch mb = mixed_batch(40);

  SUBCASE("supervised only") {
    std::vector<TrainingExample> sup(mb.batch.begin(), mb.batch.begin() + 2);
    const LossBreakdown b = batch_loss(model, sup, 0.2, 1.0).breakdown;
    CHECK(b.ctc_st == 0.0);
    CHECK(b.s2s_st == 0.0);
    CHECK(b.total == doctest::Approx(b.supervised()).epsilon(1e-15));
    CHECK(b.num_supervised == 2);
  }
  SUBCASE("pseudo only") {
    std::vector<TrainingExample> st(mb.batch.begin() + 2, mb.batch.end());
    const LossBreakdown b = batch_loss(model, st, 0.2, 1.0).breakdown;
    CHECK(b.ctc_s == 0.0);
    CHECK(b.total == doctest::Approx(b.self_training()).epsilon(1e-15));
  }
  SUBCASE("components are group means") {
    const LossBreakdown b = batch_loss(model, mb.batch, 0.3, 0.6).breakdown;
    double ctc_s = 0.0;
    for (int i = 0; i < 2; ++i) {
      const TeacherForcedOutput out = forward_teacher_forced(model, mb.feats[i], mb.batch[i].target);
      ctc_s += ctc_loss(out.ctc_log_probs, mb.batch[i].target, 0) / 2;
    }
    CHECK(b.ctc_s == doctest::Approx(ctc_s).epsilon(1e-12));
    CHECK(b.total == doctest::Approx(0.3 * b.ctc_s + 0.7 * b.s2s_s + 0.6 * (0.3 * b.ctc_st + 0.7 * b.s2s_st))
                         .epsilon(1e-12));
    CHECK(b.ctc_s >= 0.0);
    CHECK(b.s2s_st >= 0.0);
  }
  SUBCASE("unlabeled utterance is an error") {
    mb.batch[1].kind = LabelKind::kNone;
    CHECK_THROWS_AS(batch_loss(model, mb.batch, 0.2, 1.0), ValidationError);
  }
  SUBCASE("invalid weights") {
    CHECK_THROWS_AS(batch_loss(model, mb.batch, 1.2, 1.0), ValidationError);
    CHECK_THROWS_AS(batch_loss(model, mb.batch, 0.2, -1.0), ValidationError);
  }
}

TEST_CASE("batch loss is permutation invariant") {
  const TranscriberModel model = testutil::randomized_model(tiny_config(), 6, 0.5);
  MixedBatch mb = mixed_batch(50);
  const double total = batch_loss(model, mb.batch, 0.2, 1.0).breakdown.total;
  std::vector<TrainingExample> shuffled{mb.batch[3], mb.batch[0], mb.batch[2], mb.batch[1]};
  CHECK(batch_loss(model, shuffled, 0.2, 1.0).breakdown.total == doctest::Approx(total).epsilon(1e-12));
}

TEST_CASE("alpha zero gives supervised gradients") {
  const TranscriberModel model = testutil::randomized_model(tiny_config(), 7, 0.5);
  MixedBatch mb = mixed_batch(60);
  const BatchLossResult mixed = batch_loss(model, mb.batch, 0.2, 0.0);
  std::vector<TrainingExample> sup(mb.batch.begin(), mb.batch.begin() + 2);
  const BatchLossResult only = batch_loss(model, sup, 0.2, 1.0);
  CHECK(max_abs_diff(mixed.gradients, only.gradients) <= 1e-10);
  CHECK(mixed.breakdown.total == doctest::Approx(only.breakdown.total).epsilon(1e-12));
}

TEST_CASE("batch loss gradient matches finite differences") {
  TranscriberModel model = testutil::randomized_model(tiny_config(), 8, 0.5);
  CHECK(model.parameter_count() <= 2000);
  MixedBatch mb = mixed_batch(70);
  const BatchLossResult r = batch_loss(model, mb.batch, 0.2, 0.8);
  const oracle::GradientCheck gc = oracle::finite_difference_check(
      model, [&] { return batch_loss(model, mb.batch, 0.2, 0.8).breakdown.total; }, r.gradients);
  CHECK(gc.entries == model.parameter_count());
  INFO("worst parameter ", model.parameters()[gc.worst_parameter].name);
  CHECK(gc.max_relative_error < 1e-4);
}
