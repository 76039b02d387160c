#include "csem/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "csem/errors.hpp"
#include "csem/rng.hpp"
#include "csem/utf8.hpp"

namespace csem {
namespace {

std::vector<std::string> split_whitespace(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<std::string> split_tabs(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = s.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

float parse_float(const std::string& s, const std::string& context) {
  const char* begin = s.c_str();
  char* end = nullptr;
  float v = std::strtof(begin, &end);
  if (end == begin || *end != '\0') {
    throw ParseError(context + ": not a number: '" + s + "'");
  }
  return v;
}

}  // namespace

CharDictionary::CharDictionary(std::vector<char32_t> chars_by_id)
    : chars_(std::move(chars_by_id)) {
  for (std::size_t i = 0; i < chars_.size(); ++i) {
    ids_.emplace(chars_[i], static_cast<std::int32_t>(i) + 2);
  }
  if (ids_.size() != chars_.size()) {
    throw DataError("character dictionary has duplicate entries");
  }
}

std::vector<std::int32_t> CharDictionary::encode(
    const std::string& utf8_text) const {
  std::u32string scalars = utf8::decode(utf8_text);
  std::vector<std::int32_t> ids;
  ids.reserve(scalars.size());
  for (char32_t c : scalars) ids.push_back(lookup(c));
  return ids;
}

CharDictionary build_char_dictionary(const std::vector<std::string>& lines,
                                     std::size_t max_chars) {
  struct Stat {
    std::size_t count = 0;
    std::size_t first_seen = 0;
  };
  std::unordered_map<char32_t, Stat> stats;
  std::size_t position = 0;
  for (const auto& line : lines) {
    for (char32_t c : utf8::decode(line)) {
      auto [it, fresh] = stats.try_emplace(c, Stat{0, position});
      it->second.count++;
      ++position;
    }
  }
  if (stats.empty()) {
    throw DataError("cannot build a character dictionary from an empty corpus");
  }

  std::vector<std::pair<char32_t, Stat>> order(stats.begin(), stats.end());
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.second.count != b.second.count) return a.second.count > b.second.count;
    return a.second.first_seen < b.second.first_seen;
  });
  if (order.size() > max_chars) order.resize(max_chars);

  std::vector<char32_t> chars;
  chars.reserve(order.size());
  for (const auto& [c, stat] : order) chars.push_back(c);
  return CharDictionary(std::move(chars));
}

Sentence Sentence::from_tokens(std::vector<std::string> tokens) {
  if (tokens.empty()) throw DataError("sentence has no tokens");
  for (const auto& t : tokens) {
    if (t.empty()) throw DataError("sentence contains an empty token");
    for (char ch : t) {
      if (std::isspace(static_cast<unsigned char>(ch))) {
        throw DataError("token contains whitespace: '" + t + "'");
      }
    }
  }
  Sentence s;
  s.tokens = std::move(tokens);
  return s;
}

Sentence Sentence::from_line(const std::string& line) {
  return from_tokens(split_whitespace(line));
}

std::string Sentence::joined() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

void StaticWordTable::put(const std::string& word, Tensor v) {
  auto it = index_.find(word);
  if (it != index_.end()) {
    entries[it->second].second = std::move(v);
    return;
  }
  index_.emplace(word, entries.size());
  entries.emplace_back(word, std::move(v));
}

const Tensor* StaticWordTable::find(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? nullptr : &entries[it->second].second;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lines.empty() && line.size() >= 3 && line[0] == '\xEF' &&
        line[1] == '\xBB' && line[2] == '\xBF') {
      line.erase(0, 3);
    }
    lines.push_back(line);
  }
  return lines;
}

SplitResult split_corpus(const std::vector<std::string>& lines,
                         std::array<double, 3> ratios, std::uint64_t seed) {
  double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9 || ratios[0] < 0 || ratios[1] < 0 ||
      ratios[2] < 0) {
    throw ConfigError("split ratios must be non-negative and sum to 1");
  }
  const std::size_t n = lines.size();
  if (n < 3) {
    throw DataError("need at least 3 lines to split, got " +
                    std::to_string(n));
  }

  auto part = [n](double r) -> std::size_t {
    if (r <= 0) return 0;
    return std::max<std::size_t>(1, static_cast<std::size_t>(double(n) * r));
  };
  std::size_t n_valid = part(ratios[1]);
  std::size_t n_test = part(ratios[2]);
  if (n_valid + n_test >= n) {
    throw DataError("split leaves no training lines");
  }

  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(idx);

  std::size_t n_train = n - n_valid - n_test;
  std::vector<std::size_t> train_idx(idx.begin(), idx.begin() + n_train);
  std::vector<std::size_t> valid_idx(idx.begin() + n_train,
                                     idx.begin() + n_train + n_valid);
  std::vector<std::size_t> test_idx(idx.begin() + n_train + n_valid,
                                    idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(valid_idx.begin(), valid_idx.end());
  std::sort(test_idx.begin(), test_idx.end());

  SplitResult out;
  for (std::size_t i : train_idx) out.train.push_back(lines[i]);
  for (std::size_t i : valid_idx) out.valid.push_back(lines[i]);
  for (std::size_t i : test_idx) out.test.push_back(lines[i]);
  return out;
}

std::vector<TaggedSentence> read_conllu(const std::string& path, int form_col,
                                        int tag_col) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  const std::size_t need =
      static_cast<std::size_t>(std::max(form_col, tag_col)) + 1;

  std::vector<TaggedSentence> sentences;
  TaggedSentence current;
  auto flush = [&]() {
    if (!current.tokens.empty()) {
      sentences.push_back(std::move(current));
      current = TaggedSentence{};
    }
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    if (line[0] == '#') continue;
    auto cols = split_tabs(line);
    // Multiword ranges ("1-2") and empty nodes ("2.1") carry no tag.
    if (cols[0].find('-') != std::string::npos ||
        cols[0].find('.') != std::string::npos) {
      continue;
    }
    if (cols.size() < need) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(need) + " columns, got " +
                       std::to_string(cols.size()));
    }
    current.tokens.push_back(cols[static_cast<std::size_t>(form_col)]);
    current.tags.push_back(cols[static_cast<std::size_t>(tag_col)]);
  }
  flush();
  return sentences;
}

void write_conllu(const std::vector<TaggedSentence>& sentences,
                  std::ostream& out) {
  for (const auto& s : sentences) {
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      out << (i + 1) << '\t' << s.tokens[i] << "\t_\t_\t" << s.tags[i]
          << "\t_\t_\t_\t_\t_\n";
    }
    out << '\n';
  }
}

std::vector<LabeledText> read_labeled(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  static const std::string kPrefix = "__label__";

  std::vector<LabeledText> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind(kPrefix, 0) != 0) {
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": line does not start with __label__");
    }
    std::size_t space = line.find(' ', kPrefix.size());
    if (space == std::string::npos || space == kPrefix.size()) {
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": missing label or text after __label__");
    }
    std::string label = line.substr(kPrefix.size(), space - kPrefix.size());
    auto tokens = split_whitespace(line.substr(space + 1));
    if (tokens.empty()) {
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": empty text after label");
    }
    out.push_back({std::move(label), Sentence::from_tokens(std::move(tokens))});
  }
  return out;
}

StaticWordTable load_vec_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_whitespace(line);
  if (header.size() != 2) {
    throw ParseError(path + ":1: header must be 'count dim'");
  }
  long count = std::strtol(header[0].c_str(), nullptr, 10);
  long dim = std::strtol(header[1].c_str(), nullptr, 10);
  if (count <= 0 || dim <= 0) {
    throw ParseError(path + ":1: count and dim must be positive");
  }

  StaticWordTable table;
  table.dim = static_cast<std::size_t>(dim);
  long rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_whitespace(line);
    if (fields.size() != static_cast<std::size_t>(dim) + 1) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(dim) + " values for '" + fields[0] +
                       "', got " + std::to_string(fields.size() - 1));
    }
    Tensor v({static_cast<std::size_t>(dim)});
    for (long j = 0; j < dim; ++j) {
      v[static_cast<std::size_t>(j)] = parse_float(
          fields[static_cast<std::size_t>(j) + 1],
          path + ":" + std::to_string(line_no));
    }
    if (table.find(fields[0])) {
      std::cerr << "warning: " << path << ":" << line_no
                << ": duplicate word '" << fields[0] << "', keeping last\n";
    }
    table.put(fields[0], std::move(v));
    ++rows;
    if (rows > count) {
      throw ParseError(path + ": more rows than the header's " +
                       std::to_string(count));
    }
  }
  if (rows != count) {
    throw ParseError(path + ": header promises " + std::to_string(count) +
                     " rows, found " + std::to_string(rows));
  }
  return table;
}

}  // namespace csem
