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

#ifndef SELFTRANS_VOCAB_HPP_
#define SELFTRANS_VOCAB_HPP_

#include <string>
#include <string_view>
#include <vector>

namespace selftrans {

using TokenId = int;

// Character vocabulary. Ids are laid out as
//
//   0            blank (CTC only)
//   1 .. C       characters in sorted order
//   C + 1        eos
//   C + 2        sos
//   C + 3        pad
//
// so that the CTC head covers ids [0, C] and the attention decoder emits
// ids [1, C + 1] (characters + eos) through a fixed offset of one.
class Vocabulary {
 public:
  Vocabulary() = default;
  /// `characters` must be distinct; they are sorted on construction.
  explicit Vocabulary(std::vector<char> characters);

  const std::vector<char>& characters() const { return chars_; }
  int num_characters() const { return static_cast<int>(chars_.size()); }
  int size() const { return num_characters() + 4; }

  TokenId blank_id() const { return 0; }
  TokenId eos_id() const { return num_characters() + 1; }
  TokenId sos_id() const { return num_characters() + 2; }
  TokenId pad_id() const { return num_characters() + 3; }

  bool is_character(TokenId id) const { return id >= 1 && id <= num_characters(); }
  bool contains(char c) const;

  /// Width of the CTC head: characters + blank.
  int ctc_width() const { return num_characters() + 1; }
  /// Width of the decoder output layer: characters + eos.
  int decoder_width() const { return num_characters() + 1; }
  /// Decoder output class for a character or eos id.
  int decoder_class(TokenId id) const { return id - 1; }
  TokenId decoder_token(int cls) const { return cls + 1; }

  TokenId id_of(char c) const;
  char char_of(TokenId id) const;

  /// Maps every character of `text`; throws ValidationError on unknown ones.
  std::vector<TokenId> encode(std::string_view text) const;
  /// Maps character ids back to text. A trailing eos is dropped; any other
  /// special id is an error.
  std::string decode(const std::vector<TokenId>& ids) const;

  std::string to_json() const;
  static Vocabulary from_json(const std::string& json);

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;

 private:
  std::vector<char> chars_;
  int lookup_[256] = {};
};

/// Sorted character set of the transcripts plus the four specials.
Vocabulary build_vocabulary(const std::vector<std::string>& transcripts);

/// Lowercases, keeps [a-z], apostrophe and space, collapses runs of
/// whitespace and trims.
std::string normalize_transcript(std::string_view text);

/// Whitespace tokenization used by the WER scorer.
std::vector<std::string> split_words(std::string_view text);

}  // namespace selftrans

#endif  // SELFTRANS_VOCAB_HPP_
