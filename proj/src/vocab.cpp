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

#include "selftrans/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include <nlohmann/json.hpp>

#include "selftrans/common.hpp"

namespace selftrans {

Vocabulary::Vocabulary(std::vector<char> characters) : chars_(std::move(characters)) {
  std::sort(chars_.begin(), chars_.end());
  if (std::adjacent_find(chars_.begin(), chars_.end()) != chars_.end())
    throw ValidationError("vocabulary characters must be distinct");
  for (std::size_t i = 0; i < chars_.size(); ++i)
    lookup_[static_cast<unsigned char>(chars_[i])] = static_cast<int>(i) + 1;
}

bool Vocabulary::contains(char c) const { return lookup_[static_cast<unsigned char>(c)] != 0; }

TokenId Vocabulary::id_of(char c) const {
  const int id = lookup_[static_cast<unsigned char>(c)];
  if (id == 0) throw ValidationError(std::string("character not in vocabulary: '") + c + "'");
  return id;
}

char Vocabulary::char_of(TokenId id) const {
  if (!is_character(id)) throw ValidationError("not a character id: " + std::to_string(id));
  return chars_[static_cast<std::size_t>(id - 1)];
}

std::vector<TokenId> Vocabulary::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  ids.reserve(text.size());
  for (char c : text) ids.push_back(id_of(c));
  return ids;
}

std::string Vocabulary::decode(const std::vector<TokenId>& ids) const {
  std::string text;
  text.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == eos_id() && i + 1 == ids.size()) break;
    text.push_back(char_of(ids[i]));
  }
  return text;
}

std::string Vocabulary::to_json() const {
  nlohmann::json j;
  j["version"] = 1;
  j["characters"] = std::string(chars_.begin(), chars_.end());
  j["blank_id"] = blank_id();
  j["eos_id"] = eos_id();
  j["sos_id"] = sos_id();
  j["pad_id"] = pad_id();
  return j.dump();
}

Vocabulary Vocabulary::from_json(const std::string& json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("vocabulary: ") + e.what());
  }
  if (j.value("version", 0) != 1) throw ParseError("vocabulary: unsupported version");
  const std::string chars = j.at("characters").get<std::string>();
  Vocabulary vocab(std::vector<char>(chars.begin(), chars.end()));
  if (j.at("eos_id").get<int>() != vocab.eos_id() || j.at("blank_id").get<int>() != 0)
    throw ParseError("vocabulary: special ids do not match layout");
  return vocab;
}

Vocabulary build_vocabulary(const std::vector<std::string>& transcripts) {
  if (transcripts.empty()) throw ValidationError("build_vocabulary: no transcripts");
  std::set<char> seen;
  for (const auto& t : transcripts) seen.insert(t.begin(), t.end());
  return Vocabulary(std::vector<char>(seen.begin(), seen.end()));
}

std::string normalize_transcript(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (unsigned char raw : text) {
    const char c = static_cast<char>(std::tolower(raw));
    if (std::isspace(raw)) {
      pending_space = !out.empty();
    } else if ((c >= 'a' && c <= 'z') || c == '\'') {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(c);
    }
  }
  return out;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) words.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return words;
}

}  // namespace selftrans
