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

#include "oracles.hpp"
#include "selftrans/features.hpp"

using namespace selftrans;

namespace {

Matrix random_matrix(int rows, int cols, std::uint64_t seed) {
  RngStream rng(seed, "matrix");
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
  return m;
}

Utterance make_utt(const Matrix& m) {
  Utterance u;
  u.id = "u";
  u.features = m;
  u.duration_s = 1.0;
  u.transcript = "label";
  return u;
}

}  // namespace

TEST_CASE("rng streams are keyed") {
  RngStream a(3, "x"), b(3, "x"), c(3, "y"), d(4, "x");
  const double va = a.uniform();
  CHECK(va == b.uniform());
  CHECK(va != c.uniform());
  CHECK(va != d.uniform());
  CHECK(RngStream(1, "p").permutation(10) == RngStream(1, "p").permutation(10));
  CHECK(RngStream(1, "p").child("q").key() == "p/q");
}

TEST_CASE("feature frame count") {
  const std::vector<double> one(64, 0.5), two(64 + 32, 0.5);
  CHECK(extract_features(one, 64, 32).rows() == 1);
  CHECK(extract_features(two, 64, 32).rows() == 2);
  CHECK(extract_features(std::vector<double>(1000, 0.0), 64, 32).rows() == (1000 - 64) / 32 + 1);
  CHECK_THROWS_AS(extract_features(std::vector<double>(10, 0.0), 64, 32), ValidationError);
}

TEST_CASE("constant-zero signal gives equal rows") {
  const Matrix f = extract_features(std::vector<double>(500, 0.0), 64, 16, 8);
  for (int r = 1; r < f.rows(); ++r) CHECK(f.row(r) == f.row(0));
  CHECK(f(0, 0) == doctest::Approx(std::log(1e-10)));
}

TEST_CASE("speed perturbation lengths and identity") {
  const Matrix m = random_matrix(100, 3, 1);
  CHECK(speed_perturb(m, 1.0) == m);
  CHECK(speed_perturb(m, 2.0).rows() == 50);
  CHECK(speed_perturb(m, 2.0).cols() == 3);
  CHECK_THROWS_AS(speed_perturb(m, 0.0), ValidationError);
  CHECK_THROWS_AS(speed_perturb(m, 1000.0), ValidationError);
}

TEST_CASE("speed perturbation matches the interpolation oracle") {
  const Matrix m = random_matrix(100, 4, 2);
  const Matrix out = speed_perturb(m, 0.9);
  REQUIRE(out.rows() == 111);
  const Matrix ref = oracle::interpolate_rows(m, 0.9);
  CHECK((out - ref).cwiseAbs().maxCoeff() < 1e-12);
  // every row is a convex combination of two adjacent input rows
  for (int j = 0; j < out.rows(); ++j) {
    bool found = false;
    for (int t = 0; t + 1 < m.rows() && !found; ++t) {
      const Eigen::RowVectorXd d = m.row(t + 1) - m.row(t);
      const double w = d.dot(out.row(j) - m.row(t)) / d.squaredNorm();
      if (w >= -1e-12 && w <= 1 + 1e-12 && (m.row(t) + w * d - out.row(j)).norm() < 1e-9) found = true;
    }
    CHECK(found);
  }
}

TEST_CASE("time masks") {
  const Matrix m = random_matrix(50, 6, 3);
  AugmentationPolicy p;
  p.time_mask_max_ratio = 1.0;
  p.time_mask_max_frames = 10;
  AugmentationPolicy off = p;
  off.enabled = false;
  RngStream r0(1, "t");
  CHECK(time_mask(m, off, r0) == m);
  AugmentationPolicy zero = p;
  zero.time_mask_max_frames = 0;
  CHECK(time_mask(m, zero, r0) == m);
  RngStream r1(5, "t"), r2(5, "t");
  const Matrix a = time_mask(m, p, r1);
  CHECK(a == time_mask(m, p, r2));
  int zeroed_rows = 0;
  for (int t = 0; t < m.rows(); ++t) {
    const bool zeroed = a.row(t).isZero(0.0);
    if (zeroed) ++zeroed_rows;
    else CHECK(a.row(t) == m.row(t));
  }
  CHECK(zeroed_rows <= p.max_time_masks * p.time_mask_max_frames);
}

TEST_CASE("frequency masks") {
  const Matrix m = random_matrix(20, 10, 4);
  AugmentationPolicy p;
  p.max_freq_masks = 0;
  RngStream r(1, "f");
  CHECK(freq_mask(m, p, r) == m);

  Matrix spanned = m;
  zero_channel_span(spanned, 2, 4);
  for (int c = 0; c < m.cols(); ++c) {
    if (c == 2 || c == 3) CHECK(spanned.col(c).isZero(0.0));
    else CHECK(spanned.col(c) == m.col(c));
  }

  AugmentationPolicy q;
  q.freq_mask_max_ratio = 1.0;
  q.freq_mask_max_channels = 3;
  for (int seed = 0; seed < 20; ++seed) {
    RngStream rs(static_cast<std::uint64_t>(seed), "f");
    const Matrix out = freq_mask(m, q, rs);
    int masked = 0;
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      if (out.data()[i] != m.data()[i]) {
        CHECK(out.data()[i] == 0.0);
        ++masked;
      }
    }
    CHECK(masked <= q.max_freq_masks * q.freq_mask_max_channels * m.rows());
  }
}

TEST_CASE("default mask widths respect the ratio caps") {
  AugmentationPolicy p;
  CHECK(p.time_width_limit(100) == 10);
  CHECK(p.freq_width_limit(10) == 2);
  CHECK(p.time_width_limit(5) == 0);
}

TEST_CASE("noisy augmentation composition") {
  const Matrix m = random_matrix(40, 8, 5);
  const Utterance u = make_utt(m);
  RngStream r(0, "a");
  CHECK(apply_noisy_augmentation(u, AugmentationPolicy::disabled(), r).features == m);

  AugmentationPolicy id;
  id.speed_factors = {{1.0, 1.0}};
  id.time_mask_max_frames = 0;
  id.freq_mask_max_channels = 0;
  CHECK(apply_noisy_augmentation(u, id, r).features == m);

  AugmentationPolicy p;
  RngStream a(7, "aug/u/3"), b(7, "aug/u/3");
  const Utterance x = apply_noisy_augmentation(u, p, a);
  const Utterance y = apply_noisy_augmentation(u, p, b);
  CHECK(x.features == y.features);
  CHECK(x.transcript == u.transcript);
  CHECK(u.features == m);
}

TEST_CASE("augmentation counter") {
  reset_augmentation_call_count();
  const Utterance u = make_utt(random_matrix(10, 2, 6));
  RngStream r(0, "c");
  apply_noisy_augmentation(u, AugmentationPolicy{}, r);
  apply_noisy_augmentation(u, AugmentationPolicy::disabled(), r);
  CHECK(augmentation_call_count() == 2);
  reset_augmentation_call_count();
  CHECK(augmentation_call_count() == 0);
}

TEST_CASE("policy validation") {
  AugmentationPolicy p;
  p.speed_factors = {{0.9, 0.5}, {1.1, 0.4}};
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p.speed_factors = {{-1.0, 1.0}};
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = {};
  p.max_time_masks = -1;
  CHECK_THROWS_AS(p.validate(), ValidationError);
}
