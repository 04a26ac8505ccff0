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

#ifndef SELFTRANS_RNG_HPP_
#define SELFTRANS_RNG_HPP_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace selftrans {

// A named random stream. Two streams built from the same (seed, key) pair
// produce the same draws regardless of what other streams were used before,
// which is what makes per-utterance augmentation independent of batch order.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string key);

  std::uint64_t seed() const { return seed_; }
  const std::string& key() const { return key_; }

  /// Uniform integer in [lo, hi] (inclusive).
  int uniform_int(int lo, int hi);
  /// Uniform real in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  double normal(double mean, double stddev);
  /// Index drawn from a discrete distribution over `weights`.
  std::size_t categorical(const std::vector<double>& weights);
  /// Fisher-Yates permutation of [0, n).
  std::vector<std::size_t> permutation(std::size_t n);

  /// A child stream whose key is `key() + "/" + suffix`.
  RngStream child(const std::string& suffix) const;

 private:
  std::uint64_t seed_;
  std::string key_;
  std::mt19937_64 engine_;
};

}  // namespace selftrans

#endif  // SELFTRANS_RNG_HPP_
