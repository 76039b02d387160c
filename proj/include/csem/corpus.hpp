#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "csem/tensor.hpp"

namespace csem {

// Bijection between Unicode scalar values and integer ids. Ids 0 and 1 are
// reserved: 0 is the unknown-character id, 1 marks a line/sentence boundary
// in language-model streams; corpus characters start at id 2.
class CharDictionary {
 public:
  static constexpr std::int32_t kUnk = 0;
  static constexpr std::int32_t kBoundary = 1;

  CharDictionary() = default;
  explicit CharDictionary(std::vector<char32_t> chars_by_id);

  std::int32_t size() const {
    return static_cast<std::int32_t>(chars_.size()) + 2;
  }
  std::int32_t lookup(char32_t c) const {
    auto it = ids_.find(c);
    return it == ids_.end() ? kUnk : it->second;
  }
  // Valid for ids >= 2 only.
  char32_t char_at(std::int32_t id) const {
    return chars_[static_cast<std::size_t>(id - 2)];
  }
  // Characters in id order, starting at id 2.
  const std::vector<char32_t>& chars() const { return chars_; }

  // Scalar ids for a UTF-8 string, unknown characters mapped to kUnk.
  std::vector<std::int32_t> encode(const std::string& utf8_text) const;

  bool operator==(const CharDictionary& o) const { return chars_ == o.chars_; }

 private:
  std::vector<char32_t> chars_;
  std::unordered_map<char32_t, std::int32_t> ids_;
};

// The max_chars most frequent scalars get ids; ties go to the character seen
// first. Whitespace counts like any other character.
CharDictionary build_char_dictionary(const std::vector<std::string>& lines,
                                     std::size_t max_chars = 2000);

// Whitespace-separated tokens; tokens are non-empty and hold no whitespace.
struct Sentence {
  std::vector<std::string> tokens;

  static Sentence from_tokens(std::vector<std::string> tokens);
  static Sentence from_line(const std::string& line);
  // Tokens joined by single spaces.
  std::string joined() const;
};

struct TaggedSentence {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
};

struct LabeledText {
  std::string label;
  Sentence text;
};

// Word -> vector table; entry order is kept for deterministic serialization.
struct StaticWordTable {
  std::size_t dim = 0;
  std::vector<std::pair<std::string, Tensor>> entries;

  // Replaces in place when the word exists (last one wins).
  void put(const std::string& word, Tensor v);
  const Tensor* find(const std::string& word) const;

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

// Reads a UTF-8 text file into lines, dropping trailing '\r' and a leading
// byte-order mark.
std::vector<std::string> read_lines(const std::string& path);

struct SplitResult {
  std::vector<std::string> train, valid, test;
};

// Seeded line-level partition. Valid/test take floor(n * ratio) lines but at
// least one each when their ratio is positive; the remainder is training
// data. Original line order is preserved within each part.
SplitResult split_corpus(const std::vector<std::string>& lines,
                         std::array<double, 3> ratios, std::uint64_t seed);

// Tab-separated CoNLL-U-like reader. Blank lines delimit sentences, '#'
// lines are comments, multiword/empty-node ids (containing '-' or '.') are
// skipped. Column indices are zero-based; the default tag column is XPOS.
std::vector<TaggedSentence> read_conllu(const std::string& path,
                                        int form_col = 1, int tag_col = 4);

// Re-serializes the retained columns (forms + tags) in CoNLL-U shape.
void write_conllu(const std::vector<TaggedSentence>& sentences,
                  std::ostream& out);

// Lines of the form "__label__<name> <text>".
std::vector<LabeledText> read_labeled(const std::string& path);

// fastText-style text format: header "count dim", then "word v1 ... v_dim"
// rows. Duplicate words keep the last row and warn on stderr.
StaticWordTable load_vec_table(const std::string& path);

}  // namespace csem
