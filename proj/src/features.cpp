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

#include "selftrans/features.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>

namespace selftrans {

namespace {
std::atomic<std::size_t> g_augmentation_calls{0};
}

std::size_t augmentation_call_count() { return g_augmentation_calls.load(); }
void reset_augmentation_call_count() { g_augmentation_calls = 0; }

Matrix extract_features(const std::vector<double>& samples, int frame_size, int hop,
                        int num_bands) {
  if (frame_size < 2 || hop < 1 || num_bands < 1)
    throw ValidationError("extract_features: frame_size >= 2, hop >= 1, num_bands >= 1 required");
  if (static_cast<int>(samples.size()) < frame_size)
    throw ValidationError("extract_features: signal shorter than one frame");
  const int frames = (static_cast<int>(samples.size()) - frame_size) / hop + 1;
  const int bins = frame_size / 2 + 1;
  if (num_bands > bins) throw ValidationError("extract_features: more bands than DFT bins");

  Matrix out(frames, num_bands);
  std::vector<double> power(static_cast<std::size_t>(bins));
  for (int f = 0; f < frames; ++f) {
    const double* x = samples.data() + static_cast<std::ptrdiff_t>(f) * hop;
    for (int k = 0; k < bins; ++k) {
      double re = 0.0, im = 0.0;
      for (int n = 0; n < frame_size; ++n) {
        const double w = 2.0 * std::numbers::pi * k * n / frame_size;
        re += x[n] * std::cos(w);
        im -= x[n] * std::sin(w);
      }
      power[static_cast<std::size_t>(k)] = re * re + im * im;
    }
    for (int b = 0; b < num_bands; ++b) {
      const int lo = b * bins / num_bands;
      const int hi = (b + 1) * bins / num_bands;
      double energy = 0.0;
      for (int k = lo; k < hi; ++k) energy += power[static_cast<std::size_t>(k)];
      out(f, b) = std::log(energy + 1e-10);
    }
  }
  return out;
}

AugmentationPolicy AugmentationPolicy::disabled() {
  AugmentationPolicy p;
  p.enabled = false;
  p.speed_factors = {{1.0, 1.0}};
  p.max_time_masks = 0;
  p.max_freq_masks = 0;
  return p;
}

void AugmentationPolicy::validate() const {
  if (speed_factors.empty()) throw ValidationError("augmentation: no speed factors");
  double total = 0.0;
  for (const auto& s : speed_factors) {
    if (!(s.factor > 0.0)) throw ValidationError("augmentation: speed factor must be positive");
    if (!(s.probability >= 0.0)) throw ValidationError("augmentation: negative probability");
    total += s.probability;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("augmentation: probabilities must sum to 1");
  if (max_time_masks < 0 || time_mask_max_frames < 0 || max_freq_masks < 0 ||
      freq_mask_max_channels < 0)
    throw ValidationError("augmentation: mask counts and widths must be >= 0");
  if (!(time_mask_max_ratio >= 0.0 && time_mask_max_ratio <= 1.0) ||
      !(freq_mask_max_ratio >= 0.0 && freq_mask_max_ratio <= 1.0))
    throw ValidationError("augmentation: mask ratios must be in [0, 1]");
}

int AugmentationPolicy::time_width_limit(int frames) const {
  const int by_ratio = static_cast<int>(std::floor(time_mask_max_ratio * frames));
  return std::max(0, std::min({time_mask_max_frames, by_ratio, frames}));
}

int AugmentationPolicy::freq_width_limit(int channels) const {
  const int by_ratio = static_cast<int>(std::floor(freq_mask_max_ratio * channels));
  return std::max(0, std::min({freq_mask_max_channels, by_ratio, channels}));
}

Matrix speed_perturb(const Matrix& features, double factor) {
  if (!(factor > 0.0)) throw ValidationError("speed_perturb: factor must be positive");
  const auto frames = static_cast<int>(features.rows());
  if (frames < 1) throw ValidationError("speed_perturb: empty input");
  const auto out_frames = static_cast<int>(std::lround(frames / factor));
  if (out_frames < 1) throw ValidationError("speed_perturb: factor leaves no frames");
  if (factor == 1.0) return features;
  Matrix out(out_frames, features.cols());
  for (int j = 0; j < out_frames; ++j) {
    const double pos = std::min(j * factor, static_cast<double>(frames - 1));
    const int lo = static_cast<int>(std::floor(pos));
    const double frac = pos - lo;
    if (frac == 0.0 || lo + 1 >= frames)
      out.row(j) = features.row(lo);
    else
      out.row(j) = (1.0 - frac) * features.row(lo) + frac * features.row(lo + 1);
  }
  return out;
}

void zero_time_span(Matrix& features, int begin, int end) {
  begin = std::clamp(begin, 0, static_cast<int>(features.rows()));
  end = std::clamp(end, begin, static_cast<int>(features.rows()));
  features.middleRows(begin, end - begin).setZero();
}

void zero_channel_span(Matrix& features, int begin, int end) {
  begin = std::clamp(begin, 0, static_cast<int>(features.cols()));
  end = std::clamp(end, begin, static_cast<int>(features.cols()));
  features.middleCols(begin, end - begin).setZero();
}

Matrix time_mask(const Matrix& features, const AugmentationPolicy& policy, RngStream& rng) {
  Matrix out = features;
  if (!policy.enabled) return out;
  const int frames = static_cast<int>(features.rows());
  const int limit = policy.time_width_limit(frames);
  for (int m = 0; m < policy.max_time_masks; ++m) {
    const int width = rng.uniform_int(0, limit);
    const int start = rng.uniform_int(0, frames - width);
    zero_time_span(out, start, start + width);
  }
  return out;
}

Matrix freq_mask(const Matrix& features, const AugmentationPolicy& policy, RngStream& rng) {
  Matrix out = features;
  if (!policy.enabled) return out;
  const int channels = static_cast<int>(features.cols());
  const int limit = policy.freq_width_limit(channels);
  for (int m = 0; m < policy.max_freq_masks; ++m) {
    const int width = rng.uniform_int(0, limit);
    const int start = rng.uniform_int(0, channels - width);
    zero_channel_span(out, start, start + width);
  }
  return out;
}

Utterance apply_noisy_augmentation(const Utterance& utt, const AugmentationPolicy& policy,
                                   RngStream& rng) {
  ++g_augmentation_calls;
  if (!utt.has_features()) throw ValidationError("augmentation needs features: " + utt.id);
  Utterance out = utt;
  if (!policy.enabled) return out;
  policy.validate();
  std::vector<double> weights;
  for (const auto& s : policy.speed_factors) weights.push_back(s.probability);
  const double factor = policy.speed_factors[rng.categorical(weights)].factor;
  Matrix m = speed_perturb(utt.features, factor);
  m = time_mask(m, policy, rng);
  out.features = freq_mask(m, policy, rng);
  out.duration_s = utt.duration_s * static_cast<double>(out.features.rows()) /
                   static_cast<double>(utt.features.rows());
  return out;
}

}  // namespace selftrans
