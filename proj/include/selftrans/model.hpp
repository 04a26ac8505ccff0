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

#ifndef SELFTRANS_MODEL_HPP_
#define SELFTRANS_MODEL_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "selftrans/autodiff.hpp"
#include "selftrans/common.hpp"
#include "selftrans/rng.hpp"
#include "selftrans/vocab.hpp"

namespace selftrans {

struct ModelConfig {
  int input_dim = 8;
  int encoder_layers = 2;
  int encoder_dim = 32;
  int encoder_kernel = 3;
  int decoder_dim = 32;
  int attention_dim = 32;
  int location_filters = 4;
  int location_kernel = 3;
  double leaky_slope = 0.01;
  double dropout = 0.0;
  std::uint64_t seed = 0;
  Vocabulary vocab;

  void validate() const;
  std::string to_json() const;
  static ModelConfig from_json(const std::string& json);
};

struct NamedParameter {
  std::string name;
  Matrix value;
};

/// One gradient matrix per model parameter, same order and shapes.
using Gradients = std::vector<Matrix>;

// Encoder: per-frame linear adapter + leaky ReLU, followed by
// `encoder_layers` residual temporal-convolution blocks. CTC head: linear +
// log-softmax over characters and blank. Decoder: GRU cell fed with the
// previous token embedding and the previous context vector, location-aware
// additive attention (content term + convolution over the previous
// alignment), and a linear output layer over [hidden, context].
class TranscriberModel {
 public:
  /// Builds the parameter set with the deterministic initial values: Glorot
  /// uniform weights drawn from a per-parameter stream of config.seed and
  /// zero biases.
  explicit TranscriberModel(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return config_.vocab; }

  std::vector<NamedParameter>& parameters() { return params_; }
  const std::vector<NamedParameter>& parameters() const { return params_; }
  std::size_t parameter_count() const;
  bool all_finite() const;
  Gradients zero_gradients() const;

  /// Index of a parameter by name; throws if missing.
  std::size_t index_of(const std::string& name) const;

  friend bool operator==(const TranscriberModel& a, const TranscriberModel& b);

 private:
  ModelConfig config_;
  std::vector<NamedParameter> params_;
};

TranscriberModel init_model(const ModelConfig& config);

// Binds a model's parameters into an autodiff graph and builds the forward
// computation. With `grads` null the graph is used for inference only.
class ModelGraph {
 public:
  ModelGraph(ad::Graph& graph, const TranscriberModel& model, Gradients* grads);

  struct Memory {
    ad::Var states;  // T x encoder_dim
    ad::Var keys;    // T x attention_dim
    int frames = 0;
  };
  struct State {
    ad::Var hidden;     // 1 x decoder_dim
    ad::Var context;    // 1 x encoder_dim
    ad::Var attention;  // T x 1
  };

  /// `dropout_rng` enables training-mode dropout when config.dropout > 0.
  ad::Var encode(const Matrix& features, RngStream* dropout_rng = nullptr);
  ad::Var ctc_log_probs(ad::Var encoder_states);
  Memory memory(ad::Var encoder_states);
  State initial_state(int frames);
  State constant_state(const Matrix& hidden, const Matrix& context, const Matrix& attention);
  /// Returns (1 x decoder_width logits, next state).
  std::pair<ad::Var, State> step(const Memory& memory, const State& state, TokenId prev);
  /// The recurrent and attention update of step() without the output layer.
  State advance(const Memory& memory, const State& state, TokenId prev);
  /// Output layer on [hidden, context]; works row-wise on stacked steps.
  ad::Var output(ad::Var hidden, ad::Var context);
  /// sos + target fed in, (len(target) + 1) x decoder_width logits out.
  ad::Var teacher_forced_logits(const Memory& memory, const std::vector<TokenId>& target);

  ad::Graph& graph() { return graph_; }

 private:
  ad::Var p(std::size_t index) const { return vars_[index]; }

  ad::Graph& graph_;
  const TranscriberModel& model_;
  std::vector<ad::Var> vars_;
  std::vector<ad::Var> embedding_rows_;
  ad::Var location_map_;
  ad::Var token_gates_;
  ad::Var context_gates_;
};

/// T x encoder_dim; the encoder does not subsample.
Matrix encode(const TranscriberModel& model, const Matrix& features);
/// T x ctc_width row-normalized log-probabilities.
Matrix ctc_log_probs(const TranscriberModel& model, const Matrix& encoder_states);

struct DecoderState {
  Matrix hidden;     // 1 x decoder_dim
  Matrix context;    // 1 x encoder_dim
  Matrix attention;  // frames x 1, a distribution
  int step = 0;
};

/// Encoder states plus their attention projection, computed once per input.
struct AttentionMemory {
  Matrix states;
  Matrix keys;
  int frames() const { return static_cast<int>(states.rows()); }
};
AttentionMemory prepare_memory(const TranscriberModel& model, const Matrix& encoder_states);

/// Zero hidden and context; alignment concentrated on the first frame.
DecoderState initial_decoder_state(const TranscriberModel& model, int frames);

struct StepOutput {
  Matrix logits;  // 1 x decoder_width, class k <-> token id k + 1
  DecoderState state;
};
StepOutput decoder_step(const TranscriberModel& model, const DecoderState& state, TokenId prev_token,
                        const AttentionMemory& memory);
StepOutput decoder_step(const TranscriberModel& model, const DecoderState& state, TokenId prev_token,
                        const Matrix& encoder_states);

struct TeacherForcedOutput {
  Matrix ctc_log_probs;   // T x ctc_width
  Matrix decoder_logits;  // (L + 1) x decoder_width
};
TeacherForcedOutput forward_teacher_forced(const TranscriberModel& model, const Matrix& features,
                                           const std::vector<TokenId>& target);

// Checkpoint file ("STCK"): magic, u32 version = 1, u64 length + model config
// JSON, u32 parameter count, then per parameter u32 length + name, u64 rows,
// u64 cols and row-major float64 data. Loading reproduces every bit.
void save_checkpoint(const TranscriberModel& model, const std::filesystem::path& path);
TranscriberModel load_checkpoint(const std::filesystem::path& path);

}  // namespace selftrans

#endif  // SELFTRANS_MODEL_HPP_
