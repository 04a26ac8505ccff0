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

#ifndef SELFTRANS_DATA_HPP_
#define SELFTRANS_DATA_HPP_

#include <atomic>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "selftrans/common.hpp"
#include "selftrans/rng.hpp"
#include "selftrans/vocab.hpp"

namespace selftrans {

struct Utterance {
  std::string id;
  Matrix features;                        // frames x channels; empty when deferred
  std::vector<double> samples;            // raw signal, only when features are deferred
  std::optional<std::string> transcript;  // absent for unlabeled data
  double duration_s = 0.0;

  bool has_features() const { return features.rows() > 0 && features.cols() > 0; }
  int num_frames() const { return static_cast<int>(features.rows()); }
  int num_channels() const { return static_cast<int>(features.cols()); }
};

// Gold transcripts of unlabeled utterances, kept out of DatasetSplit so that
// nothing on the training path can read them. Every lookup is counted.
class HiddenGold {
 public:
  HiddenGold() = default;
  HiddenGold(const HiddenGold& other);
  HiddenGold& operator=(const HiddenGold& other);

  void insert(const std::string& id, std::string transcript);
  std::size_t size() const { return gold_.size(); }
  bool empty() const { return gold_.empty(); }

  /// Evaluation-only accessor.
  const std::string& transcript_for_evaluation(const std::string& id) const;
  /// Ordered view for serialization.
  const std::map<std::string, std::string>& entries_for_evaluation() const;

  std::size_t access_count() const { return accesses_.load(); }

 private:
  std::map<std::string, std::string> gold_;
  mutable std::atomic<std::size_t> accesses_{0};
};

enum class Role { kLabeled, kUnlabeled, kDev, kTest };
const char* role_name(Role role);
Role parse_role(const std::string& name);

struct DatasetSplit {
  std::vector<Utterance> labeled;
  std::vector<Utterance> unlabeled;
  std::vector<Utterance> dev;
  std::vector<Utterance> test;

  std::vector<Utterance>& part(Role role);
  const std::vector<Utterance>& part(Role role) const;
  std::size_t total() const { return labeled.size() + unlabeled.size() + dev.size() + test.size(); }

  /// Throws ValidationError when an invariant is broken: duplicate ids,
  /// labeled/unlabeled overlap, missing transcripts on labeled/dev/test,
  /// nonpositive durations, or empty feature matrices.
  void validate() const;
};

struct FilterCounts {
  std::size_t labeled = 0;
  std::size_t unlabeled = 0;
  std::size_t dev = 0;
  std::size_t test = 0;
  std::size_t total() const { return labeled + unlabeled + dev + test; }
};

/// Keeps utterances with duration_s <= max_duration_s, preserving order.
DatasetSplit filter_by_duration(const DatasetSplit& split, double max_duration_s,
                                FilterCounts* removed = nullptr);

// Manifest format version 1 (UTF-8, tab separated, one record per line):
//
//   #selftrans-manifest v1
//   id <TAB> role <TAB> duration_s <TAB> source <TAB> transcript
//
// role is labeled|unlabeled|dev|test. source is either a path to a matrix
// file (relative paths resolve against the manifest directory) or
// "inline:<rows>x<cols>:v,v,...". The transcript column may be empty for
// unlabeled records; when present on an unlabeled record it is moved to the
// hidden gold store. Blank lines and lines starting with '#' after the header
// are ignored.
struct LoadedCorpus {
  DatasetSplit split;
  HiddenGold gold;
};
LoadedCorpus load_manifest(const std::filesystem::path& path);

struct ManifestRecord {
  std::string id;
  Role role = Role::kLabeled;
  double duration_s = 0.0;
  std::string source;
  std::string transcript;
};
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records);

// Binary matrix file ("STMX"): magic, u32 version = 1, u32 kind
// (0 = features, 1 = raw samples), u64 rows, u64 cols, rows*cols float64
// little-endian in row-major order.
enum class MatrixKind : std::uint32_t { kFeatures = 0, kSamples = 1 };
void write_matrix_file(const std::filesystem::path& path, const Matrix& m,
                       MatrixKind kind = MatrixKind::kFeatures);
Matrix read_matrix_file(const std::filesystem::path& path, MatrixKind* kind = nullptr);

struct ToyCorpusConfig {
  int vocab_size = 8;  // characters including space
  int num_channels = 8;
  int frames_per_token_mean = 4;
  int frames_per_token_jitter = 1;
  double noise_std = 0.5;
  std::pair<int, int> transcript_length_range{2, 3};  // words per transcript
  std::pair<int, int> word_length_range{2, 4};        // characters per word
  int lexicon_size = 40;
  int num_labeled = 200;
  int num_unlabeled = 1800;
  int num_dev = 100;
  int num_test = 100;
  int num_lm_sentences = 2000;
  double frame_shift_s = 0.01;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ToyCorpus {
  DatasetSplit split;
  HiddenGold gold;                    // transcripts of split.unlabeled
  std::vector<std::string> lm_text;   // text-only sentences for the n-gram LM
  std::vector<std::string> lexicon;
  std::vector<char> alphabet;         // token order used for channel assignment
};

/// Deterministic synthetic corpus. Transcripts are word sequences drawn from a
/// seeded lexicon whose words never repeat a character twice in a row; each
/// character k of the alphabet lights channel k mod num_channels for a
/// jittered number of frames, and Gaussian noise is added on top.
ToyCorpus generate_toy_corpus(const ToyCorpusConfig& config);

/// Noise-free-capable renderer used by the generator. Token durations are
/// drawn from `rng`; noise_std = 0 yields exact prototype blocks.
Matrix render_toy_features(const std::string& transcript, const std::vector<char>& alphabet,
                           const ToyCorpusConfig& config, RngStream& rng);

/// Writes manifest + matrix files + hidden gold + LM text under `dir`.
void write_toy_corpus(const ToyCorpus& corpus, const std::filesystem::path& dir);

}  // namespace selftrans

#endif  // SELFTRANS_DATA_HPP_
