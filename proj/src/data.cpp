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

#include "selftrans/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace selftrans {

// ---------------------------------------------------------------------------
// HiddenGold

HiddenGold::HiddenGold(const HiddenGold& other) : gold_(other.gold_) {}

HiddenGold& HiddenGold::operator=(const HiddenGold& other) {
  gold_ = other.gold_;
  return *this;
}

void HiddenGold::insert(const std::string& id, std::string transcript) {
  if (!gold_.emplace(id, std::move(transcript)).second)
    throw ValidationError("duplicate gold transcript for id " + id);
}

const std::string& HiddenGold::transcript_for_evaluation(const std::string& id) const {
  ++accesses_;
  const auto it = gold_.find(id);
  if (it == gold_.end()) throw ValidationError("no gold transcript for id " + id);
  return it->second;
}

const std::map<std::string, std::string>& HiddenGold::entries_for_evaluation() const {
  ++accesses_;
  return gold_;
}

// ---------------------------------------------------------------------------
// DatasetSplit

const char* role_name(Role role) {
  switch (role) {
    case Role::kLabeled: return "labeled";
    case Role::kUnlabeled: return "unlabeled";
    case Role::kDev: return "dev";
    case Role::kTest: return "test";
  }
  return "?";
}

Role parse_role(const std::string& name) {
  if (name == "labeled") return Role::kLabeled;
  if (name == "unlabeled") return Role::kUnlabeled;
  if (name == "dev") return Role::kDev;
  if (name == "test") return Role::kTest;
  throw ParseError("unknown role '" + name + "'");
}

std::vector<Utterance>& DatasetSplit::part(Role role) {
  switch (role) {
    case Role::kLabeled: return labeled;
    case Role::kUnlabeled: return unlabeled;
    case Role::kDev: return dev;
    case Role::kTest: return test;
  }
  return labeled;
}

const std::vector<Utterance>& DatasetSplit::part(Role role) const {
  return const_cast<DatasetSplit*>(this)->part(role);
}

void DatasetSplit::validate() const {
  std::set<std::string> labeled_ids, ids;
  for (Role role : {Role::kLabeled, Role::kUnlabeled, Role::kDev, Role::kTest}) {
    for (const auto& u : part(role)) {
      if (role == Role::kUnlabeled && labeled_ids.count(u.id))
        throw ValidationError("id '" + u.id + "' is both labeled and unlabeled");
      if (!ids.insert(u.id).second)
        throw ValidationError(std::string("duplicate id '") + u.id + "' in " + role_name(role));
      if (!(u.duration_s > 0.0))
        throw ValidationError("utterance " + u.id + " has nonpositive duration");
      if (!u.has_features() && u.samples.empty())
        throw ValidationError("utterance " + u.id + " has neither features nor samples");
      if (role != Role::kUnlabeled && (!u.transcript || u.transcript->empty()))
        throw ValidationError("utterance " + u.id + " needs a nonempty transcript");
    }
    if (role == Role::kLabeled) labeled_ids = ids;
  }
}

DatasetSplit filter_by_duration(const DatasetSplit& split, double max_duration_s,
                                FilterCounts* removed) {
  if (!(max_duration_s > 0.0)) throw ValidationError("max_duration_s must be positive");
  DatasetSplit out;
  FilterCounts counts;
  std::size_t* slot[] = {&counts.labeled, &counts.unlabeled, &counts.dev, &counts.test};
  int k = 0;
  for (Role role : {Role::kLabeled, Role::kUnlabeled, Role::kDev, Role::kTest}) {
    for (const auto& u : split.part(role)) {
      if (u.duration_s <= max_duration_s)
        out.part(role).push_back(u);
      else
        ++*slot[k];
    }
    ++k;
  }
  if (removed) *removed = counts;
  return out;
}

// ---------------------------------------------------------------------------
// Matrix files

namespace {

constexpr char kMatrixMagic[4] = {'S', 'T', 'M', 'X'};
static_assert(std::endian::native == std::endian::little, "matrix files assume little-endian hosts");

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::string& what) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw ParseError("truncated " + what);
  return v;
}

}  // namespace

void write_matrix_file(const std::filesystem::path& path, const Matrix& m, MatrixKind kind) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.write(kMatrixMagic, 4);
  put<std::uint32_t>(os, 1);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(kind));
  put<std::uint64_t>(os, static_cast<std::uint64_t>(m.rows()));
  put<std::uint64_t>(os, static_cast<std::uint64_t>(m.cols()));
  os.write(reinterpret_cast<const char*>(m.data()),
           static_cast<std::streamsize>(sizeof(double) * m.size()));
}

Matrix read_matrix_file(const std::filesystem::path& path, MatrixKind* kind) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open matrix file " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMatrixMagic, 4) != 0)
    throw ParseError(path.string() + ": not a matrix file");
  if (get<std::uint32_t>(is, "version") != 1) throw ParseError(path.string() + ": bad version");
  const auto k = get<std::uint32_t>(is, "kind");
  if (k > 1) throw ParseError(path.string() + ": bad kind");
  const auto rows = get<std::uint64_t>(is, "rows");
  const auto cols = get<std::uint64_t>(is, "cols");
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  if (!is.read(reinterpret_cast<char*>(m.data()),
               static_cast<std::streamsize>(sizeof(double) * m.size())))
    throw ParseError(path.string() + ": truncated data");
  if (kind) *kind = static_cast<MatrixKind>(k);
  return m;
}

// ---------------------------------------------------------------------------
// Manifest

namespace {

constexpr const char* kManifestHeader = "#selftrans-manifest v1";

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

Matrix parse_inline(const std::string& spec) {
  // inline:<rows>x<cols>:v,v,...
  const auto colon = spec.find(':', 7);
  const auto x = spec.find('x', 7);
  if (colon == std::string::npos || x == std::string::npos || x > colon)
    throw ParseError("bad inline matrix spec");
  const long rows = std::stol(spec.substr(7, x - 7));
  const long cols = std::stol(spec.substr(x + 1, colon - x - 1));
  if (rows < 1 || cols < 1) throw ParseError("inline matrix must be at least 1x1");
  Matrix m(rows, cols);
  std::stringstream ss(spec.substr(colon + 1));
  std::string item;
  long n = 0;
  while (std::getline(ss, item, ',')) {
    if (n >= rows * cols) throw ParseError("too many inline values");
    m.data()[n++] = std::stod(item);
  }
  if (n != rows * cols) throw ParseError("inline matrix has wrong value count");
  return m;
}

}  // namespace

LoadedCorpus load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open manifest " + path.string());
  LoadedCorpus corpus;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!header_seen) {
      if (line.empty() && is.peek() == EOF) break;
      if (line != kManifestHeader)
        throw ParseError(path.string() + ":" + std::to_string(line_no) +
                         ": expected header '" + kManifestHeader + "'");
      header_seen = true;
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_tabs(line);
    const auto where = path.string() + ":" + std::to_string(line_no) + ": ";
    if (fields.size() < 4 || fields.size() > 5)
      throw ParseError(where + "expected 4 or 5 tab-separated fields");
    Utterance u;
    u.id = fields[0];
    if (u.id.empty()) throw ParseError(where + "empty id");
    Role role;
    try {
      role = parse_role(fields[1]);
      std::size_t used = 0;
      u.duration_s = std::stod(fields[2], &used);
      if (used != fields[2].size()) throw ParseError("trailing characters in duration");
      const std::string& source = fields[3];
      if (source.rfind("inline:", 0) == 0) {
        u.features = parse_inline(source);
      } else {
        std::filesystem::path file(source);
        if (file.is_relative()) file = path.parent_path() / file;
        MatrixKind kind;
        Matrix m = read_matrix_file(file, &kind);
        if (kind == MatrixKind::kSamples)
          u.samples.assign(m.data(), m.data() + m.size());
        else
          u.features = std::move(m);
      }
    } catch (const ParseError& e) {
      throw ParseError(where + e.what());
    } catch (const std::logic_error& e) {
      throw ParseError(where + "bad numeric field (" + e.what() + ")");
    }
    std::string transcript = fields.size() == 5 ? normalize_transcript(fields[4]) : "";
    if (role == Role::kUnlabeled) {
      if (!transcript.empty()) corpus.gold.insert(u.id, std::move(transcript));
    } else if (!transcript.empty()) {
      u.transcript = std::move(transcript);
    }
    corpus.split.part(role).push_back(std::move(u));
  }
  corpus.split.validate();
  return corpus;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << kManifestHeader << '\n';
  for (const auto& r : records) {
    std::ostringstream dur;
    dur << std::setprecision(17) << r.duration_s;
    os << r.id << '\t' << role_name(r.role) << '\t' << dur.str() << '\t' << r.source << '\t'
       << r.transcript << '\n';
  }
}

// ---------------------------------------------------------------------------
// Toy corpus

void ToyCorpusConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ValidationError("toy corpus: " + msg); };
  if (vocab_size < 2 || vocab_size > 27) fail("vocab_size must be in [2, 27]");
  if (num_channels < 1) fail("num_channels must be >= 1");
  if (frames_per_token_mean < 1) fail("frames_per_token_mean must be >= 1");
  if (frames_per_token_jitter < 0 || frames_per_token_jitter >= frames_per_token_mean)
    fail("frames_per_token_jitter must be in [0, mean)");
  if (!(noise_std >= 0.0)) fail("noise_std must be nonnegative");
  if (transcript_length_range.first < 1 ||
      transcript_length_range.second < transcript_length_range.first)
    fail("transcript_length_range must satisfy 1 <= lo <= hi");
  if (word_length_range.first < 1 || word_length_range.second < word_length_range.first)
    fail("word_length_range must satisfy 1 <= lo <= hi");
  if (lexicon_size < 1) fail("lexicon_size must be >= 1");
  if (num_labeled < 0 || num_unlabeled < 0 || num_dev < 0 || num_test < 0 || num_lm_sentences < 0)
    fail("counts must be >= 0");
  if (!(frame_shift_s > 0.0)) fail("frame_shift_s must be positive");
  if (vocab_size == 2 && word_length_range.second > 1)
    fail("a single letter cannot form words without repeated characters");
}

Matrix render_toy_features(const std::string& transcript, const std::vector<char>& alphabet,
                           const ToyCorpusConfig& config, RngStream& rng) {
  std::vector<int> token_index;
  std::vector<int> lengths;
  int total = 0;
  for (char c : transcript) {
    const auto it = std::find(alphabet.begin(), alphabet.end(), c);
    if (it == alphabet.end()) throw ValidationError(std::string("toy alphabet lacks '") + c + "'");
    token_index.push_back(static_cast<int>(it - alphabet.begin()));
    const int jitter = config.frames_per_token_jitter;
    const int len = config.frames_per_token_mean + (jitter > 0 ? rng.uniform_int(-jitter, jitter) : 0);
    lengths.push_back(len);
    total += len;
  }
  if (total == 0) throw ValidationError("cannot render an empty transcript");
  Matrix m = Matrix::Zero(total, config.num_channels);
  int row = 0;
  for (std::size_t k = 0; k < token_index.size(); ++k) {
    const int channel = token_index[k] % config.num_channels;
    for (int f = 0; f < lengths[k]; ++f) m(row++, channel) = 1.0;
  }
  if (config.noise_std > 0.0)
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] += rng.normal(0.0, config.noise_std);
  return m;
}

namespace {

std::vector<std::string> make_lexicon(const std::vector<char>& letters, const ToyCorpusConfig& config,
                                      RngStream& rng) {
  std::set<std::string> seen;
  std::vector<std::string> lexicon;
  int attempts = 0;
  while (static_cast<int>(lexicon.size()) < config.lexicon_size && attempts < 100000) {
    ++attempts;
    const int len = rng.uniform_int(config.word_length_range.first, config.word_length_range.second);
    std::string word;
    while (static_cast<int>(word.size()) < len) {
      const char c = letters[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(letters.size()) - 1))];
      if (!word.empty() && word.back() == c) continue;
      word.push_back(c);
    }
    if (seen.insert(word).second) lexicon.push_back(word);
  }
  return lexicon;
}

std::string make_sentence(const std::vector<std::string>& lexicon, const ToyCorpusConfig& config,
                          RngStream& rng) {
  const int words =
      rng.uniform_int(config.transcript_length_range.first, config.transcript_length_range.second);
  std::string s;
  for (int w = 0; w < words; ++w) {
    if (w) s.push_back(' ');
    s += lexicon[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(lexicon.size()) - 1))];
  }
  return s;
}

}  // namespace

ToyCorpus generate_toy_corpus(const ToyCorpusConfig& config) {
  config.validate();
  ToyCorpus corpus;
  std::vector<char> letters;
  for (int i = 0; i < config.vocab_size - 1; ++i) letters.push_back(static_cast<char>('a' + i));
  corpus.alphabet = letters;
  corpus.alphabet.push_back(' ');

  RngStream root(config.seed, "toy-corpus");
  RngStream lexicon_rng = root.child("lexicon");
  corpus.lexicon = make_lexicon(letters, config, lexicon_rng);

  struct Part {
    Role role;
    int count;
    const char* prefix;
  };
  const Part parts[] = {{Role::kLabeled, config.num_labeled, "lab"},
                        {Role::kUnlabeled, config.num_unlabeled, "unl"},
                        {Role::kDev, config.num_dev, "dev"},
                        {Role::kTest, config.num_test, "tst"}};
  for (const auto& p : parts) {
    for (int i = 0; i < p.count; ++i) {
      char id[32];
      std::snprintf(id, sizeof(id), "%s%05d", p.prefix, i);
      RngStream rng = root.child(id);
      std::string text = make_sentence(corpus.lexicon, config, rng);
      Utterance u;
      u.id = id;
      u.features = render_toy_features(text, corpus.alphabet, config, rng);
      u.duration_s = static_cast<double>(u.features.rows()) * config.frame_shift_s;
      if (p.role == Role::kUnlabeled)
        corpus.gold.insert(u.id, std::move(text));
      else
        u.transcript = std::move(text);
      corpus.split.part(p.role).push_back(std::move(u));
    }
  }
  RngStream lm_rng = root.child("lm-text");
  for (int i = 0; i < config.num_lm_sentences; ++i)
    corpus.lm_text.push_back(make_sentence(corpus.lexicon, config, lm_rng));
  return corpus;
}

void write_toy_corpus(const ToyCorpus& corpus, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "feats");
  std::vector<ManifestRecord> records;
  for (Role role : {Role::kLabeled, Role::kUnlabeled, Role::kDev, Role::kTest}) {
    for (const auto& u : corpus.split.part(role)) {
      const std::string rel = "feats/" + u.id + ".stmx";
      write_matrix_file(dir / rel, u.features);
      std::string transcript = u.transcript.value_or(std::string());
      if (role == Role::kUnlabeled) transcript = corpus.gold.transcript_for_evaluation(u.id);
      records.push_back({u.id, role, u.duration_s, rel, std::move(transcript)});
    }
  }
  write_manifest(dir / "manifest.tsv", records);
  std::ofstream lm(dir / "lm_text.txt");
  for (const auto& s : corpus.lm_text) lm << s << '\n';
}

}  // namespace selftrans
