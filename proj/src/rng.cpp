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

#include "selftrans/rng.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "selftrans/common.hpp"

namespace selftrans {

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

namespace {

// splitmix64 finalizer; spreads the FNV hash before seeding the engine.
std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::string key)
    : seed_(seed), key_(std::move(key)), engine_(mix(fnv1a64(key_, mix(seed)))) {}

int RngStream::uniform_int(int lo, int hi) {
  if (hi < lo) throw ValidationError("uniform_int: empty range");
  std::uniform_int_distribution<int> dist(lo, hi);
  return dist(engine_);
}

double RngStream::uniform() {
  // 53 random bits; stable across standard library implementations.
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double RngStream::normal(double mean, double stddev) {
  std::normal_distribution<double> dist(mean, stddev);
  return dist(engine_);
}

std::size_t RngStream::categorical(const std::vector<double>& weights) {
  if (weights.empty()) throw ValidationError("categorical: no weights");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  const double u = uniform() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return i;
  }
  return weights.size() - 1;
}

std::vector<std::size_t> RngStream::permutation(std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<int>(i - 1)));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

RngStream RngStream::child(const std::string& suffix) const {
  return RngStream(seed_, key_ + "/" + suffix);
}

}  // namespace selftrans
