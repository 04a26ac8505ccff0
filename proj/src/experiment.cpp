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

#include "selftrans/experiment.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "selftrans/features.hpp"

namespace selftrans {

using nlohmann::json;

namespace {

// Reads the keys of `j` into targets, rejecting anything not listed.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ParseError(where_ + ": expected an object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw ParseError(where_ + ": unknown key \"" + key + "\"");
  }

  template <typename T>
  void get(const char* key, T& target) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      target = it->get<T>();
    } catch (const json::exception& e) {
      throw ParseError(where_ + "." + key + ": " + e.what());
    }
  }
  const json* sub(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  const std::string& where() const { return where_; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

json policy_to_json(const AugmentationPolicy& p) {
  json speeds = json::array();
  for (const auto& s : p.speed_factors) speeds.push_back({{"factor", s.factor}, {"probability", s.probability}});
  return {{"enabled", p.enabled},
          {"speed_factors", speeds},
          {"max_time_masks", p.max_time_masks},
          {"time_mask_max_frames", p.time_mask_max_frames},
          {"time_mask_max_ratio", p.time_mask_max_ratio},
          {"max_freq_masks", p.max_freq_masks},
          {"freq_mask_max_channels", p.freq_mask_max_channels},
          {"freq_mask_max_ratio", p.freq_mask_max_ratio}};
}

void policy_from_json(const json& j, AugmentationPolicy& p, const std::string& where) {
  Reader r(j, where);
  r.get("enabled", p.enabled);
  if (const json* speeds = r.sub("speed_factors")) {
    if (!speeds->is_array()) throw ParseError(where + ".speed_factors: expected an array");
    p.speed_factors.clear();
    for (const auto& s : *speeds) {
      SpeedFactor f;
      Reader rs(s, where + ".speed_factors[]");
      rs.get("factor", f.factor);
      rs.get("probability", f.probability);
      p.speed_factors.push_back(f);
    }
  }
  r.get("max_time_masks", p.max_time_masks);
  r.get("time_mask_max_frames", p.time_mask_max_frames);
  r.get("time_mask_max_ratio", p.time_mask_max_ratio);
  r.get("max_freq_masks", p.max_freq_masks);
  r.get("freq_mask_max_channels", p.freq_mask_max_channels);
  r.get("freq_mask_max_ratio", p.freq_mask_max_ratio);
}

json toy_to_json(const ToyCorpusConfig& t) {
  return {{"vocab_size", t.vocab_size},
          {"num_channels", t.num_channels},
          {"frames_per_token_mean", t.frames_per_token_mean},
          {"frames_per_token_jitter", t.frames_per_token_jitter},
          {"noise_std", t.noise_std},
          {"transcript_length_range", {t.transcript_length_range.first, t.transcript_length_range.second}},
          {"word_length_range", {t.word_length_range.first, t.word_length_range.second}},
          {"lexicon_size", t.lexicon_size},
          {"num_labeled", t.num_labeled},
          {"num_unlabeled", t.num_unlabeled},
          {"num_dev", t.num_dev},
          {"num_test", t.num_test},
          {"num_lm_sentences", t.num_lm_sentences},
          {"frame_shift_s", t.frame_shift_s}};
}

void toy_from_json(const json& j, ToyCorpusConfig& t) {
  Reader r(j, "corpus.toy");
  r.get("vocab_size", t.vocab_size);
  r.get("num_channels", t.num_channels);
  r.get("frames_per_token_mean", t.frames_per_token_mean);
  r.get("frames_per_token_jitter", t.frames_per_token_jitter);
  r.get("noise_std", t.noise_std);
  r.get("transcript_length_range", t.transcript_length_range);
  r.get("word_length_range", t.word_length_range);
  r.get("lexicon_size", t.lexicon_size);
  r.get("num_labeled", t.num_labeled);
  r.get("num_unlabeled", t.num_unlabeled);
  r.get("num_dev", t.num_dev);
  r.get("num_test", t.num_test);
  r.get("num_lm_sentences", t.num_lm_sentences);
  r.get("frame_shift_s", t.frame_shift_s);
}

json model_to_json(const ModelConfig& m) {
  return {{"encoder_layers", m.encoder_layers},     {"encoder_dim", m.encoder_dim},
          {"encoder_kernel", m.encoder_kernel},     {"decoder_dim", m.decoder_dim},
          {"attention_dim", m.attention_dim},       {"location_filters", m.location_filters},
          {"location_kernel", m.location_kernel},   {"leaky_slope", m.leaky_slope},
          {"dropout", m.dropout}};
}

void model_from_json(const json& j, ModelConfig& m) {
  Reader r(j, "train.model");
  r.get("encoder_layers", m.encoder_layers);
  r.get("encoder_dim", m.encoder_dim);
  r.get("encoder_kernel", m.encoder_kernel);
  r.get("decoder_dim", m.decoder_dim);
  r.get("attention_dim", m.attention_dim);
  r.get("location_filters", m.location_filters);
  r.get("location_kernel", m.location_kernel);
  r.get("leaky_slope", m.leaky_slope);
  r.get("dropout", m.dropout);
}

json train_to_json(const TrainConfig& t) {
  return {{"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"pseudo_batch_size", t.pseudo_batch_size},
          {"steps_per_epoch", t.steps_per_epoch},
          {"beta", t.beta},
          {"alpha", t.alpha},
          {"learning_rate", t.learning_rate},
          {"lr_halve_patience", t.lr_halve_patience},
          {"lr_floor_ratio", t.lr_floor_ratio},
          {"grad_clip", t.grad_clip},
          {"max_utt_duration_s", t.max_utt_duration_s},
          {"sup_augmentation", policy_to_json(t.sup_augmentation)},
          {"noisy_augmentation", policy_to_json(t.noisy_augmentation)},
          {"model", model_to_json(t.model)}};
}

void train_from_json(const json& j, TrainConfig& t) {
  Reader r(j, "train");
  r.get("epochs", t.epochs);
  r.get("batch_size", t.batch_size);
  r.get("pseudo_batch_size", t.pseudo_batch_size);
  r.get("steps_per_epoch", t.steps_per_epoch);
  r.get("beta", t.beta);
  r.get("alpha", t.alpha);
  r.get("learning_rate", t.learning_rate);
  r.get("lr_halve_patience", t.lr_halve_patience);
  r.get("lr_floor_ratio", t.lr_floor_ratio);
  r.get("grad_clip", t.grad_clip);
  r.get("max_utt_duration_s", t.max_utt_duration_s);
  if (const json* p = r.sub("sup_augmentation")) policy_from_json(*p, t.sup_augmentation, "train.sup_augmentation");
  if (const json* p = r.sub("noisy_augmentation"))
    policy_from_json(*p, t.noisy_augmentation, "train.noisy_augmentation");
  if (const json* m = r.sub("model")) model_from_json(*m, t.model);
}

}  // namespace

void ExperimentConfig::set_seed(std::uint64_t s) {
  seed = s;
  train.seed = s;
  if (toy) toy->seed = s;
}

void ExperimentConfig::validate() const {
  if (manifest.has_value() == toy.has_value())
    throw ValidationError("experiment config: exactly one of corpus.manifest and corpus.toy is required");
  if (toy) toy->validate();
  if (lm_text && !manifest) throw ValidationError("experiment config: corpus.lm_text needs corpus.manifest");
  train.validate();
  if (lm.order < 1) throw ValidationError("experiment config: lm.order must be >= 1");
  if (!(lm.smoothing > 0.0)) throw ValidationError("experiment config: lm.smoothing must be positive");
  if (features.frame_size < 1 || features.hop < 1 || features.num_bands < 1)
    throw ValidationError("experiment config: feature sizes must be positive");
  if (report.generations < 1) throw ValidationError("experiment config: report.generations must be >= 1");
  if (output_dir.empty()) throw ValidationError("experiment config: output_dir is empty");
}

std::string ExperimentConfig::to_json() const {
  json corpus = json::object();
  if (manifest) corpus["manifest"] = manifest->string();
  if (lm_text) corpus["lm_text"] = lm_text->string();
  if (toy) corpus["toy"] = toy_to_json(*toy);
  json j{{"corpus", corpus},
         {"output_dir", output_dir.string()},
         {"seed", seed},
         {"train", train_to_json(train)},
         {"decode",
          {{"beam_size", train.beam_size},
           {"lm_weight", train.lm_weight},
           {"lm", {{"enabled", lm.enabled}, {"order", lm.order}, {"smoothing", lm.smoothing}}}}},
         {"features", {{"frame_size", features.frame_size}, {"hop", features.hop}, {"num_bands", features.num_bands}}},
         {"report", {{"generations", report.generations}, {"alphas", report.alphas}}}};
  return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("experiment config: ") + e.what());
  }
  ExperimentConfig c;
  {
    Reader r(j, "config");
    if (const json* corpus = r.sub("corpus")) {
      Reader rc(*corpus, "corpus");
      if (const json* m = rc.sub("manifest")) c.manifest = m->get<std::string>();
      if (const json* l = rc.sub("lm_text")) c.lm_text = l->get<std::string>();
      if (const json* t = rc.sub("toy")) {
        c.toy = ToyCorpusConfig{};
        toy_from_json(*t, *c.toy);
      }
    }
    std::string out;
    r.get("output_dir", out);
    if (!out.empty()) c.output_dir = out;
    r.get("seed", c.seed);
    if (const json* t = r.sub("train")) train_from_json(*t, c.train);
    if (const json* d = r.sub("decode")) {
      Reader rd(*d, "decode");
      rd.get("beam_size", c.train.beam_size);
      rd.get("lm_weight", c.train.lm_weight);
      if (const json* l = rd.sub("lm")) {
        Reader rl(*l, "decode.lm");
        rl.get("enabled", c.lm.enabled);
        rl.get("order", c.lm.order);
        rl.get("smoothing", c.lm.smoothing);
      }
    }
    if (const json* f = r.sub("features")) {
      Reader rf(*f, "features");
      rf.get("frame_size", c.features.frame_size);
      rf.get("hop", c.features.hop);
      rf.get("num_bands", c.features.num_bands);
    }
    if (const json* rep = r.sub("report")) {
      Reader rr(*rep, "report");
      rr.get("generations", c.report.generations);
      rr.get("alphas", c.report.alphas);
    }
  }
  c.set_seed(c.seed);
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read config " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  ExperimentConfig c = from_json(ss.str());
  const auto base = path.parent_path();
  if (c.manifest && c.manifest->is_relative()) c.manifest = base / *c.manifest;
  if (c.lm_text && c.lm_text->is_relative()) c.lm_text = base / *c.lm_text;
  return c;
}

std::string ExperimentConfig::hash() const {
  // output_dir does not change results, so it stays out of the digest.
  json j = json::parse(to_json());
  j.erase("output_dir");
  return hex64(fnv1a64(j.dump()));
}

PreparedData prepare_data(const ExperimentConfig& config) {
  config.validate();
  PreparedData out;
  if (config.toy) {
    ToyCorpus corpus = generate_toy_corpus(*config.toy);
    out.split = std::move(corpus.split);
    out.gold = std::move(corpus.gold);
    out.lm_text = std::move(corpus.lm_text);
  } else {
    LoadedCorpus corpus = load_manifest(*config.manifest);
    out.split = std::move(corpus.split);
    out.gold = std::move(corpus.gold);
    for (Role role : {Role::kLabeled, Role::kUnlabeled, Role::kDev, Role::kTest})
      for (auto& u : out.split.part(role))
        if (!u.has_features()) {
          u.features = extract_features(u.samples, config.features.frame_size, config.features.hop,
                                        config.features.num_bands);
          u.samples.clear();
        }
    if (config.lm_text) {
      std::ifstream is(*config.lm_text);
      if (!is) throw std::runtime_error("cannot read LM text " + config.lm_text->string());
      for (std::string line; std::getline(is, line);) {
        line = normalize_transcript(line);
        if (!line.empty()) out.lm_text.push_back(line);
      }
    } else {
      for (const auto& u : out.split.labeled) out.lm_text.push_back(*u.transcript);
    }
  }
  out.split.validate();
  if (config.lm.enabled) {
    std::set<char> chars;
    for (const auto& s : out.lm_text) chars.insert(s.begin(), s.end());
    for (const auto& u : out.split.labeled) chars.insert(u.transcript->begin(), u.transcript->end());
    out.lm = train_ngram_lm(out.lm_text, config.lm.order, config.lm.smoothing,
                            std::vector<char>(chars.begin(), chars.end()));
  }
  return out;
}

}  // namespace selftrans
