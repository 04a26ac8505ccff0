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

// selftrans: toy-corpus generation, teacher training, noisy-student
// self-training, evaluation, alpha sweeps and ablations.
//
// Exit status: 0 on success, 2 on usage errors, 1 on runtime errors.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "selftrans/eval.hpp"
#include "selftrans/experiment.hpp"
#include "selftrans/model.hpp"
#include "selftrans/selftrain.hpp"

namespace fs = std::filesystem;
using namespace selftrans;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<int> beam_size;
  std::optional<int> generations;
  std::string alphas;
  std::string out_dir;
  std::string checkpoint;
  std::string split = "test";
  std::string refs_file;
  bool force = false;
  bool quiet = false;
};

ExperimentConfig load_config(const Options& o) {
  if (o.config.empty()) throw UsageError("--config is required");
  if (!fs::exists(o.config)) throw UsageError("config file not found: " + o.config);
  ExperimentConfig c = ExperimentConfig::load(o.config);
  if (o.seed) c.set_seed(*o.seed);
  if (o.epochs) c.train.epochs = *o.epochs;
  if (o.beam_size) c.train.beam_size = *o.beam_size;
  if (o.generations) c.report.generations = *o.generations;
  if (!o.out_dir.empty()) c.output_dir = o.out_dir;
  c.validate();
  return c;
}

void prepare_out_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force) throw std::runtime_error("output directory " + dir.string() + " is not empty (use --force)");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

void write_train_log(const TrainResult& r, const fs::path& dir) {
  std::ofstream epochs(dir / "train_log.jsonl");
  for (const auto& e : r.epochs)
    epochs << nlohmann::json{{"epoch", e.epoch},
                             {"dev_wer", e.dev_wer},
                             {"learning_rate", e.learning_rate},
                             {"mean_total_loss", e.mean_total_loss}}
                  .dump()
           << '\n';
  std::ofstream steps(dir / "steps.jsonl");
  for (const auto& s : r.steps)
    steps << nlohmann::json{{"epoch", s.epoch},
                            {"step", s.step},
                            {"total", s.loss.total},
                            {"ctc_s", s.loss.ctc_s},
                            {"s2s_s", s.loss.s2s_s},
                            {"ctc_st", s.loss.ctc_st},
                            {"s2s_st", s.loss.s2s_st}}
                 .dump()
          << '\n';
}

void save_common(const ExperimentConfig& c, const PreparedData& data, const fs::path& dir) {
  write_text(dir / "config.json", c.to_json() + "\n");
  if (data.lm) data.lm->save(dir / "lm.txt");
}

int cmd_generate(const Options& o) {
  ExperimentConfig c = load_config(o);
  if (!c.toy) throw UsageError("generate needs a corpus.toy section");
  prepare_out_dir(c.output_dir, o.force);
  write_toy_corpus(generate_toy_corpus(*c.toy), c.output_dir);
  std::cout << "wrote toy corpus to " << c.output_dir.string() << " [" << c.hash() << "]\n";
  return 0;
}

int cmd_train_supervised(const Options& o) {
  ExperimentConfig c = load_config(o);
  prepare_out_dir(c.output_dir, o.force);
  PreparedData data = prepare_data(c);
  save_common(c, data, c.output_dir);
  const TrainResult r = train_supervised(data.split, c.train, data.lm_ptr());
  const fs::path g0 = c.output_dir / "g0";
  fs::create_directories(g0);
  save_checkpoint(r.model, g0 / "model.stck");
  write_train_log(r, g0);
  GenerationReport rep;
  rep.best_epoch = r.best_epoch;
  rep.dev_wer = evaluate_wer(r.model, data.split.dev, data.lm_ptr(), c.train.beam_size, c.train.lm_weight).wer_percent;
  rep.test_wer = evaluate_wer(r.model, data.split.test, data.lm_ptr(), c.train.beam_size, c.train.lm_weight).wer_percent;
  rep.loss_log = "train_log.jsonl";
  write_text(g0 / "report.json", generation_report_json(rep) + "\n");
  std::cout << format_generation_table({rep}, c.hash());
  return 0;
}

int cmd_selftrain(const Options& o) {
  ExperimentConfig c = load_config(o);
  prepare_out_dir(c.output_dir, o.force);
  PreparedData data = prepare_data(c);
  save_common(c, data, c.output_dir);
  SelfTrainingResult r = self_training_iterations(data.split, c.report.generations, c.train, data.lm_ptr());
  std::ofstream all(c.output_dir / "reports.jsonl");
  for (auto& g : r.generations) {
    const fs::path dir = c.output_dir / ("g" + std::to_string(g.report.generation));
    fs::create_directories(dir);
    save_checkpoint(g.training.model, dir / "model.stck");
    if (g.pseudo) g.pseudo->save(dir / "pseudo_labels.tsv");
    write_train_log(g.training, dir);
    g.report.loss_log = "train_log.jsonl";
    write_text(dir / "report.json", generation_report_json(g.report) + "\n");
    all << generation_report_json(g.report) << '\n';
  }
  write_text(c.output_dir / "final.txt", "g" + std::to_string(r.generations[r.best_generation].report.generation) + "\n");
  std::cout << format_generation_table(r.reports(), c.hash());
  return 0;
}

int cmd_evaluate(const Options& o) {
  if (o.checkpoint.empty()) throw UsageError("--checkpoint is required");
  ExperimentConfig c = load_config(o);
  if (!fs::exists(o.checkpoint)) throw std::runtime_error("checkpoint not found: " + o.checkpoint);
  const TranscriberModel model = load_checkpoint(o.checkpoint);
  PreparedData data = prepare_data(c);
  if (o.split != "dev" && o.split != "test" && o.split != "labeled")
    throw UsageError("--split must be dev, test or labeled");
  const auto& utts = data.split.part(parse_role(o.split));

  std::map<std::string, std::string> overrides;
  if (!o.refs_file.empty()) {
    std::ifstream is(o.refs_file);
    if (!is) throw std::runtime_error("cannot read " + o.refs_file);
    for (std::string line; std::getline(is, line);) {
      const auto t1 = line.find('\t');
      if (t1 == std::string::npos) continue;
      const auto t2 = line.find('\t', t1 + 1);
      overrides[line.substr(0, t1)] = line.substr(t1 + 1, t2 == std::string::npos ? std::string::npos : t2 - t1 - 1);
    }
  }
  BeamSearchOptions opts;
  opts.beam_size = c.train.beam_size;
  opts.lm = data.lm_ptr();
  opts.lm_weight = c.train.lm_weight;
  fs::create_directories(c.output_dir);
  std::ofstream hyps(c.output_dir / ("hypotheses_" + o.split + ".tsv"));
  hyps.precision(17);
  std::vector<std::string> refs, texts;
  for (const auto& u : utts) {
    const Hypothesis h = beam_search(model, u.features, opts);
    texts.push_back(hypothesis_text(model.vocab(), h));
    const auto it = overrides.find(u.id);
    refs.push_back(it != overrides.end() ? it->second : *u.transcript);
    hyps << u.id << '\t' << texts.back() << '\t' << h.score << '\t' << h.s2s_score << '\t' << h.lm_score << '\n';
  }
  const WERReport rep = word_error_rate(refs, texts);
  write_text(c.output_dir / ("wer_" + o.split + ".json"), wer_report_json(rep) + "\n");
  std::printf("%s WER %.2f%% (S=%d D=%d I=%d N=%d) [%s]\n", o.split.c_str(), rep.wer_percent, rep.substitutions,
              rep.deletions, rep.insertions, rep.ref_words, c.hash().c_str());
  return 0;
}

std::vector<double> parse_alphas(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("bad --alphas entry '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError("--alphas is empty");
  return out;
}

int cmd_sweep_alpha(const Options& o) {
  ExperimentConfig c = load_config(o);
  const auto alphas = o.alphas.empty() ? c.report.alphas : parse_alphas(o.alphas);
  prepare_out_dir(c.output_dir, o.force);
  PreparedData data = prepare_data(c);
  save_common(c, data, c.output_dir);
  const AlphaSweepResult r = alpha_sweep(data.split, alphas, c.train, data.lm_ptr());
  const std::string table = format_alpha_table(r, c.hash());
  write_text(c.output_dir / "alpha_sweep.txt", table);
  write_alpha_records(r, c.hash(), c.output_dir / "alpha_sweep.jsonl");
  std::cout << table;
  return 0;
}

int cmd_ablate(const Options& o) {
  ExperimentConfig c = load_config(o);
  prepare_out_dir(c.output_dir, o.force);
  PreparedData data = prepare_data(c);
  save_common(c, data, c.output_dir);
  const AblationResult r = ablation_run(data.split, c.train, data.lm_ptr());
  const std::string table = format_ablation_table(r.rows, c.hash());
  write_text(c.output_dir / "ablation.txt", table);
  write_ablation_records(r.rows, c.hash(), c.output_dir / "ablation.jsonl");
  std::cout << table;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"selftrans: semi-supervised transcription with noisy-student self-training"};
  app.require_subcommand(1);
  Options o;

  auto common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "Experiment JSON config");
    sub->add_option("--seed", o.seed, "Override the experiment seed");
    sub->add_option("--out-dir", o.out_dir, "Override the output directory");
    sub->add_flag("--force", o.force, "Replace a non-empty output directory");
    sub->add_option("--beam-size", o.beam_size, "Decoding beam width");
    sub->add_flag("--quiet", o.quiet, "Only log warnings");
  };
  std::map<CLI::App*, int (*)(const Options&)> handlers;
  auto add = [&](const char* name, const char* help, int (*fn)(const Options&)) {
    CLI::App* sub = app.add_subcommand(name, help);
    common(sub);
    handlers[sub] = fn;
    return sub;
  };
  add("generate", "Write a synthetic corpus", cmd_generate);
  add("train-supervised", "Train the teacher on labeled data", cmd_train_supervised)
      ->add_option("--epochs", o.epochs, "Override the epoch count");
  auto* st = add("selftrain", "Teacher plus N self-training generations", cmd_selftrain);
  st->add_option("--generations", o.generations, "Number of student generations")->check(CLI::Range(1, 1000));
  st->add_option("--epochs", o.epochs, "Override the epoch count");
  auto* ev = add("evaluate", "Decode a split and score WER", cmd_evaluate);
  ev->add_option("--checkpoint", o.checkpoint, "Model checkpoint");
  ev->add_option("--split", o.split, "dev, test or labeled");
  ev->add_option("--refs-file", o.refs_file, "TSV of id and reference text overriding the gold transcripts");
  auto* sw = add("sweep-alpha", "Dev WER for several alpha values", cmd_sweep_alpha);
  sw->add_option("--alphas", o.alphas, "Comma separated alpha values");
  sw->add_option("--epochs", o.epochs, "Override the epoch count");
  add("ablate", "Five-variant ablation table", cmd_ablate)->add_option("--epochs", o.epochs, "Override the epoch count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }
  spdlog::set_level(o.quiet ? spdlog::level::warn : spdlog::level::info);
  spdlog::set_pattern("[%l] %v");
  try {
    for (const auto& [sub, fn] : handlers)
      if (sub->parsed()) return fn(o);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
