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

#include "selftrans/decode.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace selftrans {

// ---------------------------------------------------------------------------
// N-gram LM

namespace {
constexpr char kPad = '^';
constexpr const char* kLmHeader = "#selftrans-ngram v1";
constexpr const char* kEosToken = "</s>";

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace

NgramLM::NgramLM(int order, double smoothing, std::vector<char> alphabet)
    : order_(order), smoothing_(smoothing), alphabet_(std::move(alphabet)) {
  if (order_ < 1) throw ValidationError("ngram: order must be >= 1");
  if (!(smoothing_ > 0.0)) throw ValidationError("ngram: smoothing must be positive");
  std::sort(alphabet_.begin(), alphabet_.end());
  alphabet_.erase(std::unique(alphabet_.begin(), alphabet_.end()), alphabet_.end());
  for (std::size_t i = 0; i < alphabet_.size(); ++i) {
    if (alphabet_[i] == kPad) throw ValidationError("ngram: '^' is reserved for history padding");
    lookup_[static_cast<unsigned char>(alphabet_[i])] = static_cast<int>(i) + 1;
  }
  unseen_log_prob_ = -std::log(static_cast<double>(num_outcomes()));
}

int NgramLM::outcome_of(char c) const {
  const int i = lookup_[static_cast<unsigned char>(c)];
  if (i == 0) throw ValidationError(std::string("ngram: out-of-vocabulary character '") + c + "'");
  return i - 1;
}

std::string NgramLM::context_key(std::string_view history) const {
  const auto n = static_cast<std::size_t>(order_ - 1);
  std::string key(n, kPad);
  const std::size_t take = std::min(n, history.size());
  std::copy(history.end() - static_cast<std::ptrdiff_t>(take), history.end(),
            key.end() - static_cast<std::ptrdiff_t>(take));
  return key;
}

double NgramLM::log_prob(std::string_view history, int outcome) const {
  if (outcome < 0 || outcome >= num_outcomes()) throw ValidationError("ngram: outcome out of range");
  const auto it = table_.find(context_key(history));
  if (it == table_.end()) return unseen_log_prob_;
  return it->second[static_cast<std::size_t>(outcome)];
}

std::vector<double> NgramLM::distribution(std::string_view history) const {
  const auto it = table_.find(context_key(history));
  if (it == table_.end())
    return std::vector<double>(static_cast<std::size_t>(num_outcomes()), unseen_log_prob_);
  return it->second;
}

std::string NgramLM::serialize() const {
  std::ostringstream os;
  os << kLmHeader << '\n';
  os << "order\t" << order_ << '\n';
  os << "smoothing\t" << format_double(smoothing_) << '\n';
  os << "alphabet\t" << nlohmann::json(std::string(alphabet_.begin(), alphabet_.end())).dump() << '\n';
  for (const auto& [ctx, probs] : table_) {
    const std::string qctx = nlohmann::json(ctx).dump();
    for (int o = 0; o < num_outcomes(); ++o) {
      const std::string tok = o == eos_outcome() ? std::string(kEosToken)
                                                 : std::string(1, alphabet_[static_cast<std::size_t>(o)]);
      os << qctx << '\t' << nlohmann::json(tok).dump() << '\t'
         << format_double(probs[static_cast<std::size_t>(o)]) << '\n';
    }
  }
  return os.str();
}

NgramLM NgramLM::parse(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& m) {
    throw ParseError("ngram:" + std::to_string(line_no) + ": " + m);
  };
  auto field = [&](const std::string& name) {
    ++line_no;
    if (!std::getline(is, line)) fail("missing " + name);
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.substr(0, tab) != name) fail("expected " + name);
    return line.substr(tab + 1);
  };
  ++line_no;
  if (!std::getline(is, line) || line != kLmHeader) fail("missing header");
  try {
    const int order = std::stoi(field("order"));
    const double smoothing = std::stod(field("smoothing"));
    const std::string alphabet = nlohmann::json::parse(field("alphabet")).get<std::string>();
    NgramLM lm(order, smoothing, std::vector<char>(alphabet.begin(), alphabet.end()));
    while (std::getline(is, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto t1 = line.find('\t');
      const auto t2 = line.find('\t', t1 == std::string::npos ? t1 : t1 + 1);
      if (t1 == std::string::npos || t2 == std::string::npos) fail("expected 3 fields");
      const std::string ctx = nlohmann::json::parse(line.substr(0, t1)).get<std::string>();
      const std::string tok = nlohmann::json::parse(line.substr(t1 + 1, t2 - t1 - 1)).get<std::string>();
      const double lp = std::stod(line.substr(t2 + 1));
      if (static_cast<int>(ctx.size()) != order - 1) fail("context length does not match order");
      int outcome;
      if (tok == kEosToken) outcome = lm.eos_outcome();
      else if (tok.size() == 1) outcome = lm.outcome_of(tok[0]);
      else fail("bad token");
      auto& row = lm.table_[ctx];
      if (row.empty()) row.assign(static_cast<std::size_t>(lm.num_outcomes()), std::nan(""));
      row[static_cast<std::size_t>(outcome)] = lp;
    }
    for (const auto& [ctx, row] : lm.table_)
      for (double v : row)
        if (std::isnan(v)) fail("context " + nlohmann::json(ctx).dump() + " is incomplete");
    return lm;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    fail(e.what());
  }
  return NgramLM();
}

void NgramLM::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << serialize();
}

NgramLM NgramLM::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open LM file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

NgramLM train_ngram_lm(const std::vector<std::string>& corpus, int order, double smoothing,
                       std::optional<std::vector<char>> alphabet) {
  if (corpus.empty()) throw ValidationError("train_ngram_lm: empty corpus");
  if (!alphabet) {
    std::set<char> seen;
    for (const auto& s : corpus) seen.insert(s.begin(), s.end());
    alphabet = std::vector<char>(seen.begin(), seen.end());
  }
  NgramLM lm(order, smoothing, *alphabet);
  std::map<std::string, std::vector<double>> counts;
  const auto V = static_cast<std::size_t>(lm.num_outcomes());
  for (const auto& s : corpus) {
    for (std::size_t i = 0; i <= s.size(); ++i) {
      const int outcome = i == s.size() ? lm.eos_outcome() : lm.outcome_of(s[i]);
      auto& row = counts[lm.context_key(std::string_view(s).substr(0, i))];
      if (row.empty()) row.assign(V, 0.0);
      row[static_cast<std::size_t>(outcome)] += 1.0;
    }
  }
  for (auto& [ctx, row] : counts) {
    double total = 0.0;
    for (double c : row) total += c;
    const double denom = std::log(total + smoothing * static_cast<double>(V));
    std::vector<double> lp(V);
    for (std::size_t o = 0; o < V; ++o) lp[o] = std::log(row[o] + smoothing) - denom;
    lm.table_.emplace(ctx, std::move(lp));
  }
  return lm;
}

double lm_score(const NgramLM& lm, std::string_view text) {
  double total = 0.0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    const int outcome = i == text.size() ? lm.eos_outcome() : lm.outcome_of(text[i]);
    total += lm.log_prob(text.substr(0, i), outcome);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Beam search

namespace {

struct LiveHyp {
  std::vector<TokenId> tokens;
  std::string text;
  DecoderState state;
  double s2s = 0.0;
  double lm = 0.0;
};

struct Candidate {
  std::size_t parent;
  TokenId token;
  double s2s;
  double lm;
  double score;
};

bool hyp_better(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.tokens < b.tokens;
}

}  // namespace

Hypothesis beam_search(const TranscriberModel& model, const Matrix& features,
                       const BeamSearchOptions& options) {
  if (options.beam_size < 1) throw ValidationError("beam_search: beam_size must be >= 1");
  if (options.max_len < 0) throw ValidationError("beam_search: max_len must be >= 0");
  const auto& vocab = model.vocab();
  const AttentionMemory memory = prepare_memory(model, encode(model, features));
  const int max_len = options.max_len > 0 ? options.max_len : 2 * memory.frames();
  const bool fuse = options.lm != nullptr && options.lm_weight != 0.0;
  const int width = vocab.decoder_width();

  std::vector<int> lm_outcome(static_cast<std::size_t>(width));
  if (fuse)
    for (int cls = 0; cls < width; ++cls) {
      const TokenId tok = vocab.decoder_token(cls);
      lm_outcome[static_cast<std::size_t>(cls)] =
          tok == vocab.eos_id() ? options.lm->eos_outcome() : options.lm->outcome_of(vocab.char_of(tok));
    }

  std::vector<LiveHyp> live(1);
  live[0].state = initial_decoder_state(model, memory.frames());
  std::vector<Hypothesis> finished;

  for (int step = 0; step <= max_len && !live.empty(); ++step) {
    std::vector<Candidate> candidates;
    std::vector<DecoderState> next_states;
    next_states.reserve(live.size());
    candidates.reserve(live.size() * static_cast<std::size_t>(width));
    for (std::size_t h = 0; h < live.size(); ++h) {
      const LiveHyp& hyp = live[h];
      const TokenId prev = hyp.tokens.empty() ? vocab.sos_id() : hyp.tokens.back();
      StepOutput out = decoder_step(model, hyp.state, prev, memory);
      const auto& logits = out.logits;
      const double m = logits.maxCoeff();
      const double lse = m + std::log((logits.array() - m).exp().sum());
      std::vector<double> lm_dist;
      if (fuse) lm_dist = options.lm->distribution(hyp.text);
      for (int cls = 0; cls < width; ++cls) {
        const TokenId tok = vocab.decoder_token(cls);
        if (step == max_len && tok != vocab.eos_id()) continue;
        const double s2s = hyp.s2s + logits(0, cls) - lse;
        const double lm =
            fuse ? hyp.lm + lm_dist[static_cast<std::size_t>(lm_outcome[static_cast<std::size_t>(cls)])] : 0.0;
        candidates.push_back({h, tok, s2s, lm, s2s + options.lm_weight * lm});
      }
      next_states.push_back(std::move(out.state));
    }
    const auto keep = std::min(candidates.size(), static_cast<std::size_t>(options.beam_size));
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), [&](const Candidate& a, const Candidate& b) {
                        if (a.score != b.score) return a.score > b.score;
                        const auto& ta = live[a.parent].tokens;
                        const auto& tb = live[b.parent].tokens;
                        if (ta != tb) return ta < tb;
                        return a.token < b.token;
                      });
    std::vector<LiveHyp> next;
    for (std::size_t i = 0; i < keep; ++i) {
      const Candidate& c = candidates[i];
      const LiveHyp& parent = live[c.parent];
      if (c.token == vocab.eos_id()) {
        Hypothesis done;
        done.tokens = parent.tokens;
        done.tokens.push_back(vocab.eos_id());
        done.s2s_score = c.s2s;
        done.lm_score = c.lm;
        done.score = c.score;
        done.complete = true;
        finished.push_back(std::move(done));
      } else {
        LiveHyp child;
        child.tokens = parent.tokens;
        child.tokens.push_back(c.token);
        child.text = parent.text;
        child.text.push_back(vocab.char_of(c.token));
        child.state = next_states[c.parent];
        child.s2s = c.s2s;
        child.lm = c.lm;
        next.push_back(std::move(child));
      }
    }
    live = std::move(next);
    // Extensions only lower scores when the LM weight is nonnegative, so a
    // finished hypothesis that beats every live one cannot be overtaken.
    if (!finished.empty() && !live.empty() && options.lm_weight >= 0.0) {
      double best_live = -std::numeric_limits<double>::infinity();
      for (const auto& l : live) best_live = std::max(best_live, l.s2s + options.lm_weight * l.lm);
      const auto best_done = std::min_element(finished.begin(), finished.end(), hyp_better);
      if (best_done->score > best_live) break;
    }
  }

  if (finished.empty()) {
    // Every hypothesis alive at max_len is offered eos, so this only guards
    // against a search that produced no candidates at all.
    Hypothesis best;
    best.score = -std::numeric_limits<double>::infinity();
    for (const auto& l : live) {
      Hypothesis h{l.tokens, l.s2s + options.lm_weight * l.lm, l.s2s, l.lm, false};
      if (best.tokens.empty() || hyp_better(h, best)) best = std::move(h);
    }
    return best;
  }
  return *std::min_element(finished.begin(), finished.end(), hyp_better);
}

std::vector<TokenId> greedy_ctc_decode(const Matrix& ctc_log_probs, TokenId blank_id) {
  std::vector<TokenId> out;
  TokenId prev = -1;
  for (Eigen::Index t = 0; t < ctc_log_probs.rows(); ++t) {
    Eigen::Index best;
    ctc_log_probs.row(t).maxCoeff(&best);
    const auto tok = static_cast<TokenId>(best);
    if (tok != prev && tok != blank_id) out.push_back(tok);
    prev = tok;
  }
  return out;
}

std::string hypothesis_text(const Vocabulary& vocab, const Hypothesis& hyp) {
  return vocab.decode(hyp.tokens);
}

}  // namespace selftrans
