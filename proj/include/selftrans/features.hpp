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

#ifndef SELFTRANS_FEATURES_HPP_
#define SELFTRANS_FEATURES_HPP_

#include <cstddef>
#include <vector>

#include "selftrans/common.hpp"
#include "selftrans/data.hpp"
#include "selftrans/rng.hpp"

namespace selftrans {

/// Framewise log band energies of the DFT power spectrum; stands in for a
/// learned front end. Frame count is floor((len - frame_size) / hop) + 1.
Matrix extract_features(const std::vector<double>& samples, int frame_size, int hop,
                        int num_bands = 8);

struct SpeedFactor {
  double factor = 1.0;
  double probability = 1.0;
};

struct AugmentationPolicy {
  bool enabled = true;
  std::vector<SpeedFactor> speed_factors{{0.9, 1.0 / 3}, {1.0, 1.0 / 3}, {1.1, 1.0 / 3}};
  int max_time_masks = 2;
  int time_mask_max_frames = 1 << 20;
  double time_mask_max_ratio = 0.1;  // extra cap as a fraction of the frames; 1 disables it
  int max_freq_masks = 2;
  int freq_mask_max_channels = 1 << 20;
  double freq_mask_max_ratio = 0.2;

  /// A policy that leaves every input untouched.
  static AugmentationPolicy disabled();
  void validate() const;

  /// Widest time mask allowed on an input with `frames` rows.
  int time_width_limit(int frames) const;
  int freq_width_limit(int channels) const;
};

/// Resamples along time by linear interpolation: output row j sits at input
/// position min(j * factor, frames - 1).
Matrix speed_perturb(const Matrix& features, double factor);

Matrix time_mask(const Matrix& features, const AugmentationPolicy& policy, RngStream& rng);
Matrix freq_mask(const Matrix& features, const AugmentationPolicy& policy, RngStream& rng);

/// Zeroes rows [begin, end).
void zero_time_span(Matrix& features, int begin, int end);
/// Zeroes columns [begin, end).
void zero_channel_span(Matrix& features, int begin, int end);

/// speed_perturb -> time_mask -> freq_mask on a copy of `utt`. The transcript
/// is carried over untouched.
Utterance apply_noisy_augmentation(const Utterance& utt, const AugmentationPolicy& policy,
                                   RngStream& rng);

/// Number of apply_noisy_augmentation calls since process start (or the
/// last reset); tests use it to prove the teacher never sees noised input.
std::size_t augmentation_call_count();
void reset_augmentation_call_count();

}  // namespace selftrans

#endif  // SELFTRANS_FEATURES_HPP_
