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

#include "selftrans/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace selftrans {

// ---------------------------------------------------------------------------
// Config

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw ValidationError("model config: " + m); };
  if (input_dim < 1 || encoder_dim < 1 || decoder_dim < 1 || attention_dim < 1)
    fail("dimensions must be >= 1");
  if (encoder_layers < 0) fail("encoder_layers must be >= 0");
  if (encoder_kernel < 1 || encoder_kernel % 2 == 0) fail("encoder_kernel must be odd");
  if (location_kernel < 1 || location_kernel % 2 == 0) fail("location_kernel must be odd");
  if (location_filters < 1) fail("location_filters must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
  if (vocab.num_characters() < 1) fail("vocabulary has no characters");
}

std::string ModelConfig::to_json() const {
  nlohmann::json j;
  j["input_dim"] = input_dim;
  j["encoder_layers"] = encoder_layers;
  j["encoder_dim"] = encoder_dim;
  j["encoder_kernel"] = encoder_kernel;
  j["decoder_dim"] = decoder_dim;
  j["attention_dim"] = attention_dim;
  j["location_filters"] = location_filters;
  j["location_kernel"] = location_kernel;
  j["leaky_slope"] = leaky_slope;
  j["dropout"] = dropout;
  j["seed"] = seed;
  j["vocab"] = nlohmann::json::parse(vocab.to_json());
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& json) {
  try {
    const auto j = nlohmann::json::parse(json);
    ModelConfig c;
    c.input_dim = j.at("input_dim");
    c.encoder_layers = j.at("encoder_layers");
    c.encoder_dim = j.at("encoder_dim");
    c.encoder_kernel = j.at("encoder_kernel");
    c.decoder_dim = j.at("decoder_dim");
    c.attention_dim = j.at("attention_dim");
    c.location_filters = j.at("location_filters");
    c.location_kernel = j.at("location_kernel");
    c.leaky_slope = j.at("leaky_slope");
    c.dropout = j.at("dropout");
    c.seed = j.at("seed");
    c.vocab = Vocabulary::from_json(j.at("vocab").dump());
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model config: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Parameters

namespace {

// Fixed parameter layout; per-layer encoder blocks sit between the adapter
// and the CTC head.
struct Layout {
  std::size_t conv_w(int l) const { return 2 + 2 * static_cast<std::size_t>(l); }
  std::size_t conv_b(int l) const { return conv_w(l) + 1; }
  std::size_t base;
  std::size_t ctc_w() const { return base; }
  std::size_t ctc_b() const { return base + 1; }
  std::size_t embed() const { return base + 2; }
  std::size_t gru_wx() const { return base + 3; }
  std::size_t gru_wh() const { return base + 4; }
  std::size_t gru_bx() const { return base + 5; }
  std::size_t gru_bh() const { return base + 6; }
  std::size_t att_enc() const { return base + 7; }
  std::size_t att_dec() const { return base + 8; }
  std::size_t att_b() const { return base + 9; }
  std::size_t att_loc_conv() const { return base + 10; }
  std::size_t att_loc() const { return base + 11; }
  std::size_t att_v() const { return base + 12; }
  std::size_t out_w() const { return base + 13; }
  std::size_t out_b() const { return base + 14; }
  static constexpr std::size_t kEncIn = 0, kEncInBias = 1;
};

Layout layout_for(const ModelConfig& c) { return Layout{2 + 2 * static_cast<std::size_t>(c.encoder_layers)}; }

Matrix glorot(RngStream rng, int rows, int cols) {
  const double limit = std::sqrt(6.0 / (rows + cols));
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-limit, limit);
  return m;
}

}  // namespace

TranscriberModel::TranscriberModel(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto& c = config_;
  const int D = c.encoder_dim, H = c.decoder_dim, A = c.attention_dim;
  const int V = c.vocab.size();
  auto weight = [&](const std::string& name, int rows, int cols) {
    params_.push_back({name, glorot(RngStream(c.seed, "init/" + name), rows, cols)});
  };
  auto bias = [&](const std::string& name, int cols) {
    params_.push_back({name, Matrix::Zero(1, cols)});
  };
  weight("enc.in.W", c.input_dim, D);
  bias("enc.in.b", D);
  for (int l = 0; l < c.encoder_layers; ++l) {
    weight("enc.conv" + std::to_string(l) + ".W", c.encoder_kernel * D, D);
    bias("enc.conv" + std::to_string(l) + ".b", D);
  }
  weight("ctc.W", D, c.vocab.ctc_width());
  bias("ctc.b", c.vocab.ctc_width());
  weight("dec.embed", V, H);
  weight("dec.gru.Wx", H + D, 3 * H);
  weight("dec.gru.Wh", H, 3 * H);
  bias("dec.gru.bx", 3 * H);
  bias("dec.gru.bh", 3 * H);
  weight("att.Wenc", D, A);
  weight("att.Wdec", H, A);
  bias("att.b", A);
  weight("att.loc_conv", c.location_kernel, c.location_filters);
  weight("att.Wloc", c.location_filters, A);
  weight("att.v", A, 1);
  weight("out.W", H + D, c.vocab.decoder_width());
  bias("out.b", c.vocab.decoder_width());
}

std::size_t TranscriberModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

bool TranscriberModel::all_finite() const {
  for (const auto& p : params_)
    if (!p.value.allFinite()) return false;
  return true;
}

Gradients TranscriberModel::zero_gradients() const {
  Gradients g;
  g.reserve(params_.size());
  for (const auto& p : params_) g.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  return g;
}

std::size_t TranscriberModel::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return i;
  throw std::out_of_range("no parameter named " + name);
}

bool operator==(const TranscriberModel& a, const TranscriberModel& b) {
  if (a.config_.to_json() != b.config_.to_json() || a.params_.size() != b.params_.size()) return false;
  for (std::size_t i = 0; i < a.params_.size(); ++i) {
    const auto& x = a.params_[i].value;
    const auto& y = b.params_[i].value;
    if (a.params_[i].name != b.params_[i].name || x.rows() != y.rows() || x.cols() != y.cols())
      return false;
    if (std::memcmp(x.data(), y.data(), sizeof(double) * static_cast<std::size_t>(x.size())) != 0)
      return false;
  }
  return true;
}

TranscriberModel init_model(const ModelConfig& config) { return TranscriberModel(config); }

// ---------------------------------------------------------------------------
// Graph construction

ModelGraph::ModelGraph(ad::Graph& graph, const TranscriberModel& model, Gradients* grads)
    : graph_(graph), model_(model) {
  const auto& params = model.parameters();
  if (grads && grads->size() != params.size()) *grads = model.zero_gradients();
  vars_.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i)
    vars_.push_back(graph.parameter(params[i].value, grads ? &(*grads)[i] : nullptr));
  embedding_rows_.assign(static_cast<std::size_t>(model.vocab().size()), ad::Var{});
}

ad::Var ModelGraph::encode(const Matrix& features, RngStream* dropout_rng) {
  const auto& c = model_.config();
  if (features.rows() < 1) throw ValidationError("encode: need at least one frame");
  if (features.cols() != c.input_dim)
    throw ValidationError("encode: expected " + std::to_string(c.input_dim) + " channels, got " +
                          std::to_string(features.cols()));
  if (!features.allFinite()) throw ValidationError("encode: non-finite input");
  auto& g = graph_;
  const Layout L = layout_for(c);
  ad::Var x = g.parameter(features, nullptr);
  ad::Var h = g.leaky_relu(g.add_row(g.matmul(x, p(Layout::kEncIn)), p(Layout::kEncInBias)), c.leaky_slope);
  const int half = (c.encoder_kernel - 1) / 2;
  for (int l = 0; l < c.encoder_layers; ++l) {
    ad::Var conv = g.add_row(g.matmul(g.row_taps(h, half), p(L.conv_w(l))), p(L.conv_b(l)));
    h = g.add(h, g.leaky_relu(conv, c.leaky_slope));
  }
  if (dropout_rng && c.dropout > 0.0) {
    const Matrix& hv = g.value(h);
    Matrix keep(hv.rows(), hv.cols());
    for (Eigen::Index i = 0; i < keep.size(); ++i)
      keep.data()[i] = dropout_rng->uniform() < c.dropout ? 0.0 : 1.0 / (1.0 - c.dropout);
    h = g.mask(h, keep);
  }
  return h;
}

ad::Var ModelGraph::ctc_log_probs(ad::Var encoder_states) {
  const Layout L = layout_for(model_.config());
  return graph_.log_softmax_rows(
      graph_.add_row(graph_.matmul(encoder_states, p(L.ctc_w())), p(L.ctc_b())));
}

ModelGraph::Memory ModelGraph::memory(ad::Var encoder_states) {
  const Layout L = layout_for(model_.config());
  Memory m;
  m.states = encoder_states;
  m.keys = graph_.matmul(encoder_states, p(L.att_enc()));
  m.frames = static_cast<int>(graph_.value(encoder_states).rows());
  return m;
}

ModelGraph::State ModelGraph::initial_state(int frames) {
  const auto& c = model_.config();
  Matrix attention = Matrix::Zero(frames, 1);
  attention(0, 0) = 1.0;
  return constant_state(Matrix::Zero(1, c.decoder_dim), Matrix::Zero(1, c.encoder_dim), attention);
}

ModelGraph::State ModelGraph::constant_state(const Matrix& hidden, const Matrix& context,
                                             const Matrix& attention) {
  return State{graph_.constant(hidden), graph_.constant(context), graph_.constant(attention)};
}

ModelGraph::State ModelGraph::advance(const Memory& memory, const State& state, TokenId prev) {
  const auto& c = model_.config();
  if (prev < 0 || prev >= c.vocab.size()) throw ValidationError("decoder_step: invalid token id");
  if (graph_.value(state.attention).rows() != memory.frames)
    throw ValidationError("decoder_step: state does not match encoder length");
  auto& g = graph_;
  const Layout L = layout_for(c);
  const int H = c.decoder_dim;

  // GRU cell. The input weights split into an embedding block, folded into a
  // per-token table once per graph, and a context block.
  if (token_gates_.id < 0) {
    token_gates_ = g.matmul(p(L.embed()), g.slice_rows(p(L.gru_wx()), 0, H));
    context_gates_ = g.slice_rows(p(L.gru_wx()), H, c.encoder_dim);
  }
  auto& emb = embedding_rows_[static_cast<std::size_t>(prev)];
  if (emb.id < 0) emb = g.row(token_gates_, prev);
  ad::Var gx = g.add_row(g.add(emb, g.matmul(state.context, context_gates_)), p(L.gru_bx()));
  ad::Var gh = g.add_row(g.matmul(state.hidden, p(L.gru_wh())), p(L.gru_bh()));
  ad::Var z = g.sigmoid(g.add(g.slice_cols(gx, 0, H), g.slice_cols(gh, 0, H)));
  ad::Var r = g.sigmoid(g.add(g.slice_cols(gx, H, H), g.slice_cols(gh, H, H)));
  ad::Var n = g.tanh(g.add(g.slice_cols(gx, 2 * H, H), g.mul(r, g.slice_cols(gh, 2 * H, H))));
  ad::Var hidden = g.add(g.mul(g.one_minus(z), n), g.mul(z, state.hidden));

  // Location-aware attention
  // The filter bank and its projection are both linear, so they are merged
  // once per graph into a single kernel x attention_dim map.
  if (location_map_.id < 0) location_map_ = g.matmul(p(L.att_loc_conv()), p(L.att_loc()));
  ad::Var loc = g.matmul(g.row_taps(state.attention, (c.location_kernel - 1) / 2), location_map_);
  ad::Var query = g.add(g.matmul(hidden, p(L.att_dec())), p(L.att_b()));
  ad::Var energy = g.matmul(g.tanh(g.add_row(g.add(memory.keys, loc), query)), p(L.att_v()));
  ad::Var attention = g.softmax_column(energy);
  ad::Var context = g.matmul_tn(attention, memory.states);

  return State{hidden, context, attention};
}

ad::Var ModelGraph::output(ad::Var hidden, ad::Var context) {
  const Layout L = layout_for(model_.config());
  return graph_.add_row(graph_.matmul(graph_.concat_cols({hidden, context}), p(L.out_w())), p(L.out_b()));
}

std::pair<ad::Var, ModelGraph::State> ModelGraph::step(const Memory& memory, const State& state,
                                                       TokenId prev) {
  State next = advance(memory, state, prev);
  return {output(next.hidden, next.context), next};
}

ad::Var ModelGraph::teacher_forced_logits(const Memory& memory, const std::vector<TokenId>& target) {
  const auto& vocab = model_.vocab();
  State state = initial_state(memory.frames);
  std::vector<ad::Var> hiddens, contexts;
  hiddens.reserve(target.size() + 1);
  contexts.reserve(target.size() + 1);
  TokenId prev = vocab.sos_id();
  for (std::size_t i = 0; i <= target.size(); ++i) {
    state = advance(memory, state, prev);
    hiddens.push_back(state.hidden);
    contexts.push_back(state.context);
    if (i < target.size()) prev = target[i];
  }
  // One output projection for all steps.
  return output(graph_.concat_rows(hiddens), graph_.concat_rows(contexts));
}

// ---------------------------------------------------------------------------
// Value-level API

Matrix encode(const TranscriberModel& model, const Matrix& features) {
  ad::Graph g(false);
  ModelGraph mg(g, model, nullptr);
  return g.value(mg.encode(features));
}

Matrix ctc_log_probs(const TranscriberModel& model, const Matrix& encoder_states) {
  ad::Graph g(false);
  ModelGraph mg(g, model, nullptr);
  return g.value(mg.ctc_log_probs(g.parameter(encoder_states, nullptr)));
}

AttentionMemory prepare_memory(const TranscriberModel& model, const Matrix& encoder_states) {
  if (encoder_states.cols() != model.config().encoder_dim)
    throw ValidationError("prepare_memory: encoder width mismatch");
  const Layout L = layout_for(model.config());
  return AttentionMemory{encoder_states, encoder_states * model.parameters()[L.att_enc()].value};
}

DecoderState initial_decoder_state(const TranscriberModel& model, int frames) {
  if (frames < 1) throw ValidationError("initial_decoder_state: need at least one frame");
  DecoderState s;
  s.hidden = Matrix::Zero(1, model.config().decoder_dim);
  s.context = Matrix::Zero(1, model.config().encoder_dim);
  s.attention = Matrix::Zero(frames, 1);
  s.attention(0, 0) = 1.0;
  return s;
}

StepOutput decoder_step(const TranscriberModel& model, const DecoderState& state, TokenId prev_token,
                        const AttentionMemory& memory) {
  if (state.attention.rows() != memory.frames() || state.attention.cols() != 1 ||
      state.hidden.cols() != model.config().decoder_dim ||
      state.context.cols() != model.config().encoder_dim)
    throw ValidationError("decoder_step: state does not match model / encoder states");
  ad::Graph g(false);
  ModelGraph mg(g, model, nullptr);
  ModelGraph::Memory mem{g.parameter(memory.states, nullptr), g.parameter(memory.keys, nullptr),
                         memory.frames()};
  ModelGraph::State st{g.parameter(state.hidden, nullptr), g.parameter(state.context, nullptr),
                       g.parameter(state.attention, nullptr)};
  auto [logits, next] = mg.step(mem, st, prev_token);
  StepOutput out;
  out.logits = g.value(logits);
  out.state.hidden = g.value(next.hidden);
  out.state.context = g.value(next.context);
  out.state.attention = g.value(next.attention);
  out.state.step = state.step + 1;
  return out;
}

StepOutput decoder_step(const TranscriberModel& model, const DecoderState& state, TokenId prev_token,
                        const Matrix& encoder_states) {
  return decoder_step(model, state, prev_token, prepare_memory(model, encoder_states));
}

TeacherForcedOutput forward_teacher_forced(const TranscriberModel& model, const Matrix& features,
                                           const std::vector<TokenId>& target) {
  if (target.empty()) throw ValidationError("forward_teacher_forced: empty target");
  for (TokenId t : target)
    if (!model.vocab().is_character(t))
      throw ValidationError("forward_teacher_forced: target may only contain character ids");
  ad::Graph g(false);
  ModelGraph mg(g, model, nullptr);
  ad::Var enc = mg.encode(features);
  TeacherForcedOutput out;
  out.ctc_log_probs = g.value(mg.ctc_log_probs(enc));
  out.decoder_logits = g.value(mg.teacher_forced_logits(mg.memory(enc), target));
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kCheckpointMagic[4] = {'S', 'T', 'C', 'K'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw ParseError("checkpoint: truncated");
  return v;
}

}  // namespace

void save_checkpoint(const TranscriberModel& model, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path.string());
  os.write(kCheckpointMagic, 4);
  put<std::uint32_t>(os, 1);
  const std::string config = model.config().to_json();
  put<std::uint64_t>(os, config.size());
  os.write(config.data(), static_cast<std::streamsize>(config.size()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(model.parameters().size()));
  for (const auto& p : model.parameters()) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(p.value.rows()));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(p.value.cols()));
    os.write(reinterpret_cast<const char*>(p.value.data()),
             static_cast<std::streamsize>(sizeof(double) * p.value.size()));
  }
  if (!os) throw std::runtime_error("failed writing checkpoint " + path.string());
}

TranscriberModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open checkpoint " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw ParseError(path.string() + ": not a checkpoint");
  if (get<std::uint32_t>(is) != 1) throw ParseError(path.string() + ": unsupported version");
  std::string config(get<std::uint64_t>(is), '\0');
  if (!is.read(config.data(), static_cast<std::streamsize>(config.size())))
    throw ParseError("checkpoint: truncated config");
  TranscriberModel model(ModelConfig::from_json(config));
  const auto count = get<std::uint32_t>(is);
  if (count != model.parameters().size()) throw ParseError("checkpoint: parameter count mismatch");
  for (auto& p : model.parameters()) {
    std::string name(get<std::uint32_t>(is), '\0');
    if (!is.read(name.data(), static_cast<std::streamsize>(name.size())))
      throw ParseError("checkpoint: truncated name");
    const auto rows = get<std::uint64_t>(is);
    const auto cols = get<std::uint64_t>(is);
    if (name != p.name || rows != static_cast<std::uint64_t>(p.value.rows()) ||
        cols != static_cast<std::uint64_t>(p.value.cols()))
      throw ParseError("checkpoint: unexpected parameter " + name);
    if (!is.read(reinterpret_cast<char*>(p.value.data()),
                 static_cast<std::streamsize>(sizeof(double) * p.value.size())))
      throw ParseError("checkpoint: truncated data");
  }
  return model;
}

}  // namespace selftrans
