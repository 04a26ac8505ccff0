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

#include "selftrans/selftrain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include <spdlog/spdlog.h>

namespace selftrans {

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw ValidationError("train config: " + m); };
  if (epochs < 0) fail("epochs must be >= 0");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (pseudo_batch_size < 0) fail("pseudo_batch_size must be >= 0");
  if (steps_per_epoch < 0) fail("steps_per_epoch must be >= 0");
  if (!(beta >= 0.0 && beta <= 1.0)) fail("beta must be in [0, 1]");
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail("alpha must be in [0, 1]");
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (lr_halve_patience < 1) fail("lr_halve_patience must be >= 1");
  if (!(lr_floor_ratio > 0.0 && lr_floor_ratio <= 1.0)) fail("lr_floor_ratio must be in (0, 1]");
  if (!(grad_clip >= 0.0)) fail("grad_clip must be >= 0");
  if (beam_size < 1) fail("beam_size must be >= 1");
  if (!(max_utt_duration_s > 0.0)) fail("max_utt_duration_s must be positive");
  sup_augmentation.validate();
  noisy_augmentation.validate();
}

void PseudoLabelSet::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << std::setprecision(17);
  for (const auto& [id, label] : entries) os << id << '\t' << label.transcript << '\t' << label.score << '\n';
}

std::vector<GenerationReport> SelfTrainingResult::reports() const {
  std::vector<GenerationReport> out;
  for (const auto& g : generations) out.push_back(g.report);
  return out;
}

ModelConfig resolve_model_config(const DatasetSplit& split, const TrainConfig& config) {
  if (split.labeled.empty()) throw ValidationError("no labeled utterances");
  ModelConfig mc = config.model;
  if (!split.labeled.front().has_features())
    throw ValidationError("labeled utterances need features (run feature extraction first)");
  mc.input_dim = split.labeled.front().num_channels();
  if (mc.vocab.num_characters() == 0) {
    std::vector<std::string> texts;
    for (const auto& u : split.labeled) texts.push_back(*u.transcript);
    mc.vocab = build_vocabulary(texts);
  }
  mc.seed = fnv1a64("model-init", config.seed);
  return mc;
}

std::vector<std::string> decode_utterances(const TranscriberModel& model,
                                           const std::vector<Utterance>& utts, const NgramLM* lm,
                                           int beam_size, double lm_weight) {
  BeamSearchOptions opts;
  opts.beam_size = beam_size;
  opts.lm = lm;
  opts.lm_weight = lm_weight;
  std::vector<std::string> out;
  out.reserve(utts.size());
  for (const auto& u : utts) out.push_back(hypothesis_text(model.vocab(), beam_search(model, u.features, opts)));
  return out;
}

WERReport evaluate_wer(const TranscriberModel& model, const std::vector<Utterance>& utts,
                       const NgramLM* lm, int beam_size, double lm_weight) {
  std::vector<std::string> refs;
  refs.reserve(utts.size());
  for (const auto& u : utts) {
    if (!u.transcript) throw ValidationError("evaluate_wer: utterance " + u.id + " has no transcript");
    refs.push_back(*u.transcript);
  }
  return word_error_rate(refs, decode_utterances(model, utts, lm, beam_size, lm_weight));
}

namespace {

// Adam with bias correction.
class Adam {
 public:
  explicit Adam(const TranscriberModel& model) : m_(model.zero_gradients()), v_(model.zero_gradients()) {}

  void step(TranscriberModel& model, const Gradients& grads, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, t_);
    const double c2 = 1.0 - std::pow(kBeta2, t_);
    auto& params = model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grads[i];
      v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grads[i].cwiseProduct(grads[i]);
      params[i].value.array() -=
          lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + kEps);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  Gradients m_, v_;
  int t_ = 0;
};

void clip_gradients(Gradients& grads, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (const auto& g : grads) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm)
    for (auto& g : grads) g *= max_norm / norm;
}

// Endless stream of batches over a pool: successive seeded permutations,
// consumed by a cursor that carries over across epochs.
class BatchStream {
 public:
  BatchStream(std::size_t pool, std::uint64_t seed, std::string name)
      : pool_(pool), seed_(seed), name_(std::move(name)) {}

  struct Item {
    std::size_t index;
    int cycle;
  };

  std::vector<Item> next(std::size_t count) {
    std::vector<Item> items;
    while (items.size() < count && pool_ > 0) {
      if (pos_ == order_.size()) {
        ++cycle_;
        order_ = RngStream(seed_, name_ + "/order/" + std::to_string(cycle_)).permutation(pool_);
        pos_ = 0;
      }
      items.push_back({order_[pos_++], cycle_});
    }
    return items;
  }

 private:
  std::size_t pool_;
  std::uint64_t seed_;
  std::string name_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  int cycle_ = -1;
};

struct PseudoExample {
  const Utterance* utt;
  std::string transcript;
};

std::vector<Utterance> within_duration(const std::vector<Utterance>& utts, double max_s) {
  std::vector<Utterance> out;
  for (const auto& u : utts)
    if (u.duration_s <= max_s) out.push_back(u);
  return out;
}

TrainResult run_training(TranscriberModel model, const std::vector<Utterance>& labeled,
                         const std::vector<PseudoExample>& pseudo, const std::vector<Utterance>& dev,
                         const TrainConfig& config, const NgramLM* lm, const char* tag) {
  config.validate();
  if (labeled.empty()) throw ValidationError("training needs labeled utterances");
  const auto& vocab = model.vocab();
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  const std::size_t pseudo_batch =
      static_cast<std::size_t>(config.pseudo_batch_size > 0 ? config.pseudo_batch_size : config.batch_size);
  // By default an epoch is one pass over the larger of the pools that carry
  // weight, so alpha = 0 keeps the supervised schedule.
  const std::size_t pseudo_passes = config.alpha > 0.0 ? (pseudo.size() + pseudo_batch - 1) / pseudo_batch : 0;
  const std::size_t passes = std::max((labeled.size() + batch - 1) / batch, pseudo_passes);
  const int steps_per_epoch =
      config.steps_per_epoch > 0 ? config.steps_per_epoch : static_cast<int>(passes);

  TrainResult result(model);
  Adam adam(model);
  BatchStream labeled_stream(labeled.size(), config.seed, "labeled");
  BatchStream pseudo_stream(pseudo.size(), config.seed, "pseudo");
  double lr = config.learning_rate;
  const double lr_floor = config.learning_rate * config.lr_floor_ratio;
  double best = std::numeric_limits<double>::infinity();
  int since_improvement = 0;
  int global_step = 0;

  std::vector<std::vector<TokenId>> labeled_targets;
  for (const auto& u : labeled) labeled_targets.push_back(vocab.encode(*u.transcript));
  std::vector<std::vector<TokenId>> pseudo_targets;
  for (const auto& p : pseudo) pseudo_targets.push_back(vocab.encode(p.transcript));

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    double loss_sum = 0.0;
    for (int s = 0; s < steps_per_epoch; ++s, ++global_step) {
      std::vector<Matrix> augmented;
      augmented.reserve(batch + pseudo_batch);
      std::vector<TrainingExample> examples;
      auto add = [&](const Utterance& u, const std::vector<TokenId>& target, LabelKind kind,
                     const AugmentationPolicy& policy, const std::string& key) {
        const Matrix* feats = &u.features;
        if (policy.enabled) {
          RngStream rng(config.seed, key);
          augmented.push_back(apply_noisy_augmentation(u, policy, rng).features);
          feats = &augmented.back();
        }
        examples.push_back({feats, target, kind});
      };
      for (const auto& item : labeled_stream.next(batch)) {
        const auto& u = labeled[item.index];
        add(u, labeled_targets[item.index], LabelKind::kSupervised, config.sup_augmentation,
            "aug/sup/" + u.id + "/" + std::to_string(item.cycle));
      }
      for (const auto& item : pseudo_stream.next(pseudo_batch)) {
        const auto& p = pseudo[item.index];
        add(*p.utt, pseudo_targets[item.index], LabelKind::kPseudo, config.noisy_augmentation,
            "aug/st/" + p.utt->id + "/" + std::to_string(item.cycle));
      }
      RngStream dropout_rng(config.seed, "dropout/" + std::to_string(global_step));
      BatchLossResult r = batch_loss(model, examples, config.beta, config.alpha, &dropout_rng);
      clip_gradients(r.gradients, config.grad_clip);
      adam.step(model, r.gradients, lr);
      loss_sum += r.breakdown.total;
      result.steps.push_back({epoch, global_step, r.breakdown});
    }
    if (!model.all_finite()) throw std::runtime_error("training diverged: non-finite parameters");

    EpochRecord rec;
    rec.epoch = epoch;
    rec.learning_rate = lr;
    rec.mean_total_loss = steps_per_epoch > 0 ? loss_sum / steps_per_epoch : 0.0;
    if (!dev.empty()) {
      rec.dev_wer = evaluate_wer(model, dev, lm, config.beam_size, config.lm_weight).wer_percent;
    } else {
      rec.dev_wer = std::numeric_limits<double>::quiet_NaN();
    }
    result.epochs.push_back(rec);
    spdlog::info("[{}] epoch {} loss {:.4f} dev WER {:.2f} lr {:.2e}", tag, epoch, rec.mean_total_loss,
                 rec.dev_wer, lr);

    const bool improved = dev.empty() || rec.dev_wer < best;
    if (improved) {
      best = dev.empty() ? best : rec.dev_wer;
      since_improvement = 0;
      result.model = model;
      result.best_epoch = epoch;
      result.best_dev_wer = rec.dev_wer;
    } else if (++since_improvement >= config.lr_halve_patience) {
      lr = std::max(lr / 2.0, lr_floor);
      since_improvement = 0;
    }
  }
  return result;
}

}  // namespace

TrainResult train_supervised(const DatasetSplit& split, const TrainConfig& config, const NgramLM* lm) {
  config.validate();
  if (split.labeled.empty()) throw ValidationError("train_supervised: empty labeled set");
  const auto labeled = within_duration(split.labeled, config.max_utt_duration_s);
  if (labeled.empty()) throw ValidationError("train_supervised: duration filter removed every utterance");
  const TranscriberModel init = init_model(resolve_model_config(split, config));
  return run_training(init, labeled, {}, split.dev, config, lm, "supervised");
}

PseudoLabelSet pseudo_label(const TranscriberModel& teacher, const std::vector<Utterance>& unlabeled,
                            const NgramLM* lm, const TrainConfig& config, int generation,
                            std::string teacher_id) {
  if (unlabeled.empty()) throw ValidationError("pseudo_label: no unlabeled utterances");
  double max_speed = 1.0;
  if (config.noisy_augmentation.enabled)
    for (const auto& s : config.noisy_augmentation.speed_factors)
      if (s.probability > 0.0) max_speed = std::max(max_speed, s.factor);

  PseudoLabelSet set;
  set.generation = generation;
  set.teacher_id = std::move(teacher_id);
  for (const auto& u : unlabeled) {
    if (u.duration_s > config.max_utt_duration_s) continue;
    // Any label of length <= T'/2 fits T' CTC frames, whatever its repeats.
    const auto shortest = static_cast<int>(std::lround(u.num_frames() / max_speed));
    BeamSearchOptions opts;
    opts.beam_size = config.beam_size;
    opts.lm = lm;
    opts.lm_weight = config.lm_weight;
    opts.max_len = std::max(1, shortest / 2);
    const Hypothesis hyp = beam_search(teacher, u.features, opts);
    std::string text = hypothesis_text(teacher.vocab(), hyp);
    if (text.empty()) {
      ++set.dropped_empty;
      continue;
    }
    set.entries.emplace(u.id, PseudoLabel{std::move(text), hyp.score});
  }
  return set;
}

TrainResult train_semi(const TranscriberModel& init, const DatasetSplit& split,
                       const PseudoLabelSet& pseudo, const TrainConfig& config, const NgramLM* lm) {
  config.validate();
  if (split.labeled.empty()) throw ValidationError("train_semi: empty labeled set");
  const auto labeled = within_duration(split.labeled, config.max_utt_duration_s);
  std::vector<PseudoExample> examples;
  for (const auto& u : split.unlabeled) {
    const auto it = pseudo.entries.find(u.id);
    if (it != pseudo.entries.end()) examples.push_back({&u, it->second.transcript});
  }
  if (examples.size() != pseudo.entries.size())
    throw ValidationError("train_semi: pseudo labels reference ids outside the unlabeled split");
  if (examples.empty()) {
    spdlog::warn("train_semi: no pseudo labels left; falling back to supervised training");
    return run_training(init, labeled, {}, split.dev, config, lm, "supervised-fallback");
  }
  return run_training(init, labeled, examples, split.dev, config, lm, "semi");
}

SelfTrainingResult self_training_iterations(const DatasetSplit& split, int n_generations,
                                            const TrainConfig& config, const NgramLM* lm) {
  if (n_generations < 1) throw ValidationError("self_training_iterations: need >= 1 generation");
  SelfTrainingResult out;
  auto finish = [&](GenerationResult& g) {
    g.report.best_epoch = g.training.best_epoch;
    g.report.dev_wer =
        split.dev.empty() ? 0.0 : evaluate_wer(g.training.model, split.dev, lm, config.beam_size, config.lm_weight).wer_percent;
    g.report.test_wer =
        split.test.empty() ? 0.0 : evaluate_wer(g.training.model, split.test, lm, config.beam_size, config.lm_weight).wer_percent;
    spdlog::info("generation {}: dev WER {:.2f} test WER {:.2f}", g.report.generation, g.report.dev_wer,
                 g.report.test_wer);
  };

  GenerationResult teacher{GenerationReport{}, train_supervised(split, config, lm), std::nullopt};
  teacher.report.generation = 0;
  finish(teacher);
  out.generations.push_back(std::move(teacher));

  const TranscriberModel fresh = init_model(resolve_model_config(split, config));
  for (int g = 1; g <= n_generations; ++g) {
    const auto& previous = out.generations.back().training.model;
    PseudoLabelSet pseudo = pseudo_label(previous, split.unlabeled, lm, config, g, "g" + std::to_string(g - 1));
    GenerationResult gen{GenerationReport{}, train_semi(fresh, split, pseudo, config, lm), std::nullopt};
    gen.report.generation = g;
    gen.report.pseudo_label_count = static_cast<int>(pseudo.entries.size());
    gen.report.dropped_empty = pseudo.dropped_empty;
    gen.pseudo = std::move(pseudo);
    finish(gen);
    out.generations.push_back(std::move(gen));
  }
  for (std::size_t i = 1; i < out.generations.size(); ++i)
    if (out.generations[i].report.dev_wer < out.generations[out.best_generation].report.dev_wer)
      out.best_generation = i;
  return out;
}

}  // namespace selftrans
