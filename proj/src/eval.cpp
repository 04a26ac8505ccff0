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

#include "selftrans/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

namespace selftrans {

namespace {

double dev_wer_of(const TranscriberModel& model, const DatasetSplit& split, const TrainConfig& config,
                  const NgramLM* lm) {
  return evaluate_wer(model, split.dev, lm, config.beam_size, config.lm_weight).wer_percent;
}

double test_wer_of(const TranscriberModel& model, const DatasetSplit& split, const TrainConfig& config,
                   const NgramLM* lm) {
  return evaluate_wer(model, split.test, lm, config.beam_size, config.lm_weight).wer_percent;
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

void write_lines(const std::vector<nlohmann::json>& records, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  for (const auto& r : records) os << r.dump() << '\n';
}

}  // namespace

AlphaSweepResult alpha_sweep(const DatasetSplit& split, std::vector<double> alphas,
                             const TrainConfig& config, const NgramLM* lm) {
  if (alphas.empty()) throw ValidationError("alpha_sweep: no alpha values");
  for (double a : alphas)
    if (!(a >= 0.0 && a <= 1.0)) throw ValidationError("alpha_sweep: alpha outside [0, 1]");
  AlphaSweepResult out;
  std::sort(alphas.begin(), alphas.end());
  const auto last = std::unique(alphas.begin(), alphas.end());
  out.duplicates_removed = static_cast<int>(alphas.end() - last);
  alphas.erase(last, alphas.end());
  if (out.duplicates_removed > 0)
    spdlog::warn("alpha_sweep: removed {} duplicate alpha value(s)", out.duplicates_removed);

  const TrainResult teacher = train_supervised(split, config, lm);
  out.teacher_dev_wer = dev_wer_of(teacher.model, split, config, lm);
  const PseudoLabelSet pseudo = pseudo_label(teacher.model, split.unlabeled, lm, config, 1, "g0");
  const TranscriberModel fresh = init_model(resolve_model_config(split, config));
  for (double a : alphas) {
    TrainConfig c = config;
    c.alpha = a;
    const TrainResult student = train_semi(fresh, split, pseudo, c, lm);
    out.rows.push_back({a, dev_wer_of(student.model, split, config, lm)});
  }
  for (std::size_t i = 1; i < out.rows.size(); ++i)
    if (out.rows[i].dev_wer < out.rows[out.best].dev_wer) out.best = i;
  return out;
}

AblationResult ablation_run(const DatasetSplit& split, const TrainConfig& config, const NgramLM* lm) {
  config.validate();
  AblationResult out{{}, self_training_iterations(split, 2, config, lm)};
  const auto& gens = out.iterations.generations;

  TrainConfig quiet = config;
  quiet.sup_augmentation = AugmentationPolicy::disabled();
  quiet.noisy_augmentation = AugmentationPolicy::disabled();
  const TranscriberModel fresh = init_model(resolve_model_config(split, config));
  const TrainResult no_noise = train_semi(fresh, split, *gens[1].pseudo, quiet, lm);

  TrainConfig no_sup_aug = config;
  no_sup_aug.sup_augmentation = AugmentationPolicy::disabled();
  const TrainResult bare = train_supervised(split, no_sup_aug, lm);

  auto row = [&](const char* name, const GenerationReport& r) {
    out.rows.push_back({name, r.dev_wer, r.test_wer});
  };
  auto row_of = [&](const char* name, const TranscriberModel& m) {
    out.rows.push_back({name, dev_wer_of(m, split, config, lm), test_wer_of(m, split, config, lm)});
  };
  row("full", gens[2].report);
  row("-iteration", gens[1].report);
  row_of("-iteration-NoisyAug", no_noise.model);
  row("-self-training", gens[0].report);
  row_of("-self-training-SupAug", bare.model);
  return out;
}

std::string format_alpha_table(const AlphaSweepResult& result, const std::string& tag) {
  std::ostringstream os;
  os << "alpha sweep  [" << tag << "]\n";
  os << "alpha   dev WER\n";
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    os << pad(fixed(result.rows[i].alpha), 8) << fixed(result.rows[i].dev_wer);
    if (i == result.best) os << "  *";
    os << '\n';
  }
  return os.str();
}

std::string format_ablation_table(const std::vector<AblationRow>& rows, const std::string& tag) {
  std::ostringstream os;
  os << "ablation  [" << tag << "]\n";
  os << pad("variant", 24) << pad("dev WER", 10) << "test WER\n";
  for (const auto& r : rows) os << pad(r.variant, 24) << pad(fixed(r.dev_wer), 10) << fixed(r.test_wer) << '\n';
  return os.str();
}

std::string format_generation_table(const std::vector<GenerationReport>& reports, const std::string& tag) {
  std::ostringstream os;
  os << "generations  [" << tag << "]\n";
  os << pad("gen", 5) << pad("dev WER", 10) << pad("test WER", 10) << pad("pseudo", 8) << "dropped\n";
  for (const auto& r : reports)
    os << pad(std::to_string(r.generation), 5) << pad(fixed(r.dev_wer), 10) << pad(fixed(r.test_wer), 10)
       << pad(std::to_string(r.pseudo_label_count), 8) << r.dropped_empty << '\n';
  return os.str();
}

void write_alpha_records(const AlphaSweepResult& result, const std::string& tag,
                         const std::filesystem::path& path) {
  std::vector<nlohmann::json> records;
  for (std::size_t i = 0; i < result.rows.size(); ++i)
    records.push_back({{"config_hash", tag},
                       {"alpha", result.rows[i].alpha},
                       {"dev_wer", result.rows[i].dev_wer},
                       {"best", i == result.best}});
  write_lines(records, path);
}

void write_ablation_records(const std::vector<AblationRow>& rows, const std::string& tag,
                            const std::filesystem::path& path) {
  std::vector<nlohmann::json> records;
  for (const auto& r : rows)
    records.push_back({{"config_hash", tag}, {"variant", r.variant}, {"dev_wer", r.dev_wer}, {"test_wer", r.test_wer}});
  write_lines(records, path);
}

std::string wer_report_json(const WERReport& r) {
  nlohmann::json j{{"substitutions", r.substitutions},
                   {"deletions", r.deletions},
                   {"insertions", r.insertions},
                   {"ref_words", r.ref_words},
                   {"wer_percent", r.wer_percent}};
  return j.dump();
}

std::string generation_report_json(const GenerationReport& r) {
  nlohmann::json j{{"generation", r.generation},
                   {"dev_wer", r.dev_wer},
                   {"test_wer", r.test_wer},
                   {"pseudo_label_count", r.pseudo_label_count},
                   {"dropped_empty", r.dropped_empty},
                   {"best_epoch", r.best_epoch},
                   {"loss_log", r.loss_log}};
  return j.dump();
}

}  // namespace selftrans
