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

// Python bindings: scoring primitives, the n-gram LM, model checkpoints and
// decoding, and the experiment pipeline driven by a JSON config.

#include <optional>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "selftrans/decode.hpp"
#include "selftrans/eval.hpp"
#include "selftrans/experiment.hpp"
#include "selftrans/features.hpp"
#include "selftrans/losses.hpp"
#include "selftrans/model.hpp"
#include "selftrans/selftrain.hpp"
#include "selftrans/wer.hpp"

namespace py = pybind11;
using namespace selftrans;

namespace {

py::dict wer_dict(const WERReport& r) {
  py::dict d;
  d["substitutions"] = r.substitutions;
  d["deletions"] = r.deletions;
  d["insertions"] = r.insertions;
  d["ref_words"] = r.ref_words;
  d["wer_percent"] = r.wer_percent;
  return d;
}

py::dict report_dict(const GenerationReport& r) {
  py::dict d;
  d["generation"] = r.generation;
  d["dev_wer"] = r.dev_wer;
  d["test_wer"] = r.test_wer;
  d["pseudo_label_count"] = r.pseudo_label_count;
  d["dropped_empty"] = r.dropped_empty;
  d["best_epoch"] = r.best_epoch;
  return d;
}

py::list epochs_list(const TrainResult& r) {
  py::list out;
  for (const auto& e : r.epochs) {
    py::dict d;
    d["epoch"] = e.epoch;
    d["dev_wer"] = e.dev_wer;
    d["learning_rate"] = e.learning_rate;
    d["mean_total_loss"] = e.mean_total_loss;
    out.append(d);
  }
  return out;
}

py::dict pseudo_dict(const PseudoLabelSet& set) {
  py::dict d;
  for (const auto& [id, pl] : set.entries) d[py::str(id)] = py::make_tuple(pl.transcript, pl.score);
  return d;
}

PseudoLabelSet pseudo_from_dict(const py::dict& d) {
  PseudoLabelSet set;
  for (const auto& [k, v] : d) {
    const auto t = v.cast<py::tuple>();
    set.entries[k.cast<std::string>()] = {t[0].cast<std::string>(), t[1].cast<double>()};
  }
  return set;
}

// A prepared experiment: config plus loaded data and LM.
class Experiment {
 public:
  explicit Experiment(const std::string& config_json)
      : config_(ExperimentConfig::from_json(config_json)), data_(prepare_data(config_)) {}

  const ExperimentConfig& config() const { return config_; }
  const DatasetSplit& split() const { return data_.split; }
  const NgramLM* lm() const { return data_.lm_ptr(); }

  WERReport evaluate(const TranscriberModel& m, const std::string& role) const {
    const Role r = parse_role(role);
    if (r == Role::kUnlabeled) throw ValidationError("evaluate: the unlabeled split has no references");
    return evaluate_wer(m, data_.split.part(r), lm(), config_.train.beam_size, config_.train.lm_weight);
  }

 private:
  ExperimentConfig config_;
  PreparedData data_;
};

}  // namespace

PYBIND11_MODULE(_selftrans, m) {
  m.doc() = "Semi-supervised transcription with noisy-student self-training";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

  m.def("ctc_loss", &ctc_loss, py::arg("log_probs"), py::arg("target"), py::arg("blank_id") = 0);
  m.def("ctc_min_frames", &ctc_min_frames, py::arg("target"));
  m.def("s2s_loss", &s2s_loss, py::arg("logits"), py::arg("target_classes"));
  m.def("multitask_loss", &multitask_loss, py::arg("ctc"), py::arg("s2s"), py::arg("beta"));
  m.def("unified_loss", &unified_loss, py::arg("supervised"), py::arg("self_training"), py::arg("alpha"));
  m.def("word_error_rate", [](const std::vector<std::string>& refs, const std::vector<std::string>& hyps) {
    return wer_dict(word_error_rate(refs, hyps));
  });
  m.def("speed_perturb", &speed_perturb, py::arg("features"), py::arg("factor"));
  m.def("augmentation_call_count", &augmentation_call_count);

  py::class_<Vocabulary>(m, "Vocabulary")
      .def(py::init<std::vector<char>>())
      .def_property_readonly("characters", &Vocabulary::characters)
      .def_property_readonly("blank_id", &Vocabulary::blank_id)
      .def_property_readonly("eos_id", &Vocabulary::eos_id)
      .def_property_readonly("sos_id", &Vocabulary::sos_id)
      .def("encode", &Vocabulary::encode)
      .def("decode", &Vocabulary::decode);

  py::class_<NgramLM>(m, "NgramLM")
      .def_static(
          "train",
          [](const std::vector<std::string>& corpus, int order, double smoothing) {
            return train_ngram_lm(corpus, order, smoothing);
          },
          py::arg("corpus"), py::arg("order"), py::arg("smoothing") = 1.0)
      .def_property_readonly("order", &NgramLM::order)
      .def_property_readonly("alphabet", &NgramLM::alphabet)
      .def("score", [](const NgramLM& lm, const std::string& text) { return lm_score(lm, text); })
      .def("serialize", &NgramLM::serialize)
      .def_static("parse", &NgramLM::parse)
      .def("save", &NgramLM::save)
      .def_static("load", &NgramLM::load);

  py::class_<TranscriberModel>(m, "Model")
      .def_static("load", &load_checkpoint, py::arg("path"))
      .def("save", [](const TranscriberModel& model, const std::filesystem::path& p) { save_checkpoint(model, p); })
      .def_property_readonly("vocab", &TranscriberModel::vocab)
      .def_property_readonly("parameter_count", &TranscriberModel::parameter_count)
      .def("config_json", [](const TranscriberModel& model) { return model.config().to_json(); })
      .def("ctc_log_probs",
           [](const TranscriberModel& model, const Matrix& f) { return ctc_log_probs(model, encode(model, f)); })
      .def(
          "decode",
          [](const TranscriberModel& model, const Matrix& features, int beam_size, const NgramLM* lm,
             double lm_weight, int max_len) {
            BeamSearchOptions o;
            o.beam_size = beam_size;
            o.lm = lm;
            o.lm_weight = lm_weight;
            o.max_len = max_len;
            const Hypothesis h = beam_search(model, features, o);
            return py::make_tuple(hypothesis_text(model.vocab(), h), h.score, h.complete);
          },
          py::arg("features"), py::arg("beam_size") = 8, py::arg("lm") = nullptr, py::arg("lm_weight") = 0.3,
          py::arg("max_len") = 0)
      .def("__eq__", [](const TranscriberModel& a, const TranscriberModel& b) { return a == b; });

  py::class_<Experiment>(m, "Experiment")
      .def(py::init<std::string>(), py::arg("config_json"))
      .def_property_readonly("config_hash", [](const Experiment& e) { return e.config().hash(); })
      .def_property_readonly("config_json", [](const Experiment& e) { return e.config().to_json(); })
      .def_property_readonly("sizes",
                             [](const Experiment& e) {
                               py::dict d;
                               d["labeled"] = e.split().labeled.size();
                               d["unlabeled"] = e.split().unlabeled.size();
                               d["dev"] = e.split().dev.size();
                               d["test"] = e.split().test.size();
                               return d;
                             })
      .def_property_readonly("lm", [](const Experiment& e) -> std::optional<NgramLM> {
        if (e.lm()) return *e.lm();
        return std::nullopt;
      })
      .def("features",
           [](const Experiment& e, const std::string& role, std::size_t index) {
             return e.split().part(parse_role(role)).at(index).features;
           })
      .def("init_model",
           [](const Experiment& e) { return init_model(resolve_model_config(e.split(), e.config().train)); })
      .def("train_supervised",
           [](const Experiment& e) {
             TrainResult r = train_supervised(e.split(), e.config().train, e.lm());
             return py::make_tuple(r.model, epochs_list(r));
           })
      .def("pseudo_label",
           [](const Experiment& e, const TranscriberModel& teacher) {
             return pseudo_dict(pseudo_label(teacher, e.split().unlabeled, e.lm(), e.config().train));
           })
      .def(
          "train_semi",
          [](const Experiment& e, const py::dict& pseudo, std::optional<double> alpha) {
            TrainConfig c = e.config().train;
            if (alpha) c.alpha = *alpha;
            const TranscriberModel init = init_model(resolve_model_config(e.split(), c));
            TrainResult r = train_semi(init, e.split(), pseudo_from_dict(pseudo), c, e.lm());
            return py::make_tuple(r.model, epochs_list(r));
          },
          py::arg("pseudo"), py::arg("alpha") = py::none())
      .def(
          "self_train",
          [](const Experiment& e, std::optional<int> generations) {
            const SelfTrainingResult r = self_training_iterations(
                e.split(), generations.value_or(e.config().report.generations), e.config().train, e.lm());
            py::list reports;
            for (const auto& g : r.reports()) reports.append(report_dict(g));
            return py::make_tuple(r.final_model(), reports);
          },
          py::arg("generations") = py::none())
      .def("evaluate", [](const Experiment& e, const TranscriberModel& model,
                          const std::string& role) { return wer_dict(e.evaluate(model, role)); },
           py::arg("model"), py::arg("split") = "dev");
}
