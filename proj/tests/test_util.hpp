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

#ifndef SELFTRANS_TESTS_TEST_UTIL_HPP_
#define SELFTRANS_TESTS_TEST_UTIL_HPP_

#include <string>
#include <vector>

#include "selftrans/common.hpp"
#include "selftrans/model.hpp"
#include "selftrans/rng.hpp"
#include "selftrans/vocab.hpp"

namespace testutil {

using selftrans::Matrix;

inline Matrix random_matrix(int rows, int cols, std::uint64_t seed, double scale = 1.0) {
  selftrans::RngStream rng(seed, "test-matrix");
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
  return m;
}

/// Row-wise log-softmax of a random matrix.
inline Matrix random_log_probs(int rows, int cols, std::uint64_t seed) {
  Matrix m = random_matrix(rows, cols, seed, 2.0);
  for (int r = 0; r < rows; ++r) {
    const double mx = m.row(r).maxCoeff();
    const double lse = mx + std::log((m.row(r).array() - mx).exp().sum());
    m.row(r).array() -= lse;
  }
  return m;
}

/// A few hundred parameters: small enough for exhaustive finite differences.
inline selftrans::ModelConfig tiny_config(const std::string& chars = "abc", int input_dim = 3,
                                          std::uint64_t seed = 1) {
  selftrans::ModelConfig c;
  c.input_dim = input_dim;
  c.encoder_layers = 1;
  c.encoder_dim = 4;
  c.encoder_kernel = 3;
  c.decoder_dim = 4;
  c.attention_dim = 4;
  c.location_filters = 2;
  c.location_kernel = 3;
  c.seed = seed;
  c.vocab = selftrans::Vocabulary(std::vector<char>(chars.begin(), chars.end()));
  return c;
}

/// Scales every weight so random tiny models have peaked, non-trivial outputs.
inline selftrans::TranscriberModel randomized_model(const selftrans::ModelConfig& c, std::uint64_t seed,
                                                     double scale = 1.5) {
  selftrans::TranscriberModel m(c);
  selftrans::RngStream rng(seed, "randomize");
  for (auto& p : m.parameters())
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = rng.uniform(-scale, scale);
  return m;
}

}  // namespace testutil

#endif  // SELFTRANS_TESTS_TEST_UTIL_HPP_
