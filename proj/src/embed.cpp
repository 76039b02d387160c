#include "csem/embed.hpp"

#include <algorithm>

#include "csem/errors.hpp"
#include "csem/utf8.hpp"

namespace csem {
namespace {

// Character stream of a sentence plus, per word, the stream offsets of its
// first and last character. Offset 0 is the leading boundary id; the space
// after a word is not part of the word.
struct SentenceStream {
  std::vector<std::int32_t> ids;
  std::vector<std::size_t> first_char;
  std::vector<std::size_t> last_char;
};

SentenceStream sentence_stream(const CharDictionary& dict, const Sentence& s) {
  if (s.tokens.empty()) throw DataError("cannot embed an empty sentence");
  SentenceStream out;
  out.ids.push_back(CharDictionary::kBoundary);
  for (std::size_t i = 0; i < s.tokens.size(); ++i) {
    if (i) out.ids.push_back(dict.lookup(U' '));
    std::u32string scalars = utf8::decode(s.tokens[i]);
    out.first_char.push_back(out.ids.size());
    for (char32_t c : scalars) out.ids.push_back(dict.lookup(c));
    out.last_char.push_back(out.ids.size() - 1);
  }
  return out;
}

}  // namespace

ContextualEmbedder::ContextualEmbedder(std::shared_ptr<const CharLM> forward,
                                       std::shared_ptr<const CharLM> backward,
                                       std::string label)
    : forward_(std::move(forward)),
      backward_(std::move(backward)),
      label_(std::move(label)) {
  if (!forward_) {
    throw ConfigError("contextual embedder needs a forward language model");
  }
  if (forward_->config.backward) {
    throw DataError("contextual embedder: " + label_ +
                    ": the forward slot holds a backward-direction model");
  }
  if (backward_) {
    if (!backward_->config.backward) {
      throw DataError("contextual embedder: " + label_ +
                      ": the backward slot holds a forward-direction model");
    }
    if (!(backward_->dict == forward_->dict)) {
      throw DataError("contextual embedder: " + label_ +
                      ": forward and backward models use different "
                      "character dictionaries");
    }
  }
}

std::size_t ContextualEmbedder::dim() const {
  return forward_->hidden() + (backward_ ? backward_->hidden() : 0);
}

std::vector<Tensor> ContextualEmbedder::embed(const Sentence& s) const {
  SentenceStream stream = sentence_stream(forward_->dict, s);
  const std::size_t words = s.tokens.size();

  // Forward direction: states after each word's last character.
  std::vector<Tensor> fwd =
      lm_hidden_states(*forward_, stream.ids, stream.last_char);

  std::vector<Tensor> bwd;
  if (backward_) {
    // The backward LM consumes the reversed stream; a word's state is taken
    // once the model has read back to the word's first character.
    std::vector<std::int32_t> reversed(stream.ids.rbegin(),
                                       stream.ids.rend());
    const std::size_t n = stream.ids.size();
    std::vector<std::size_t> positions(words);
    for (std::size_t i = 0; i < words; ++i) {
      positions[i] = n - 1 - stream.first_char[words - 1 - i];
    }
    std::vector<Tensor> states =
        lm_hidden_states(*backward_, reversed, positions);
    bwd.resize(words);
    for (std::size_t i = 0; i < words; ++i) {
      bwd[i] = std::move(states[words - 1 - i]);
    }
  }

  std::vector<Tensor> out;
  out.reserve(words);
  for (std::size_t i = 0; i < words; ++i) {
    if (!backward_) {
      out.push_back(std::move(fwd[i]));
      continue;
    }
    Tensor v({dim()});
    std::copy(fwd[i].data(), fwd[i].data() + fwd[i].size(), v.data());
    std::copy(bwd[i].data(), bwd[i].data() + bwd[i].size(),
              v.data() + fwd[i].size());
    out.push_back(std::move(v));
  }
  return out;
}

std::string ContextualEmbedder::describe() const {
  return label_ + "(dim " + std::to_string(dim()) + ")";
}

StaticEmbedder::StaticEmbedder(std::shared_ptr<const StaticWordTable> table,
                               std::string label)
    : table_(std::move(table)), label_(std::move(label)) {
  if (!table_ || table_->dim == 0) {
    throw ConfigError("static embedder needs a non-empty vector table");
  }
}

std::vector<Tensor> StaticEmbedder::embed(const Sentence& s) const {
  if (s.tokens.empty()) throw DataError("cannot embed an empty sentence");
  std::vector<Tensor> out;
  out.reserve(s.tokens.size());
  for (const auto& token : s.tokens) {
    if (const Tensor* v = table_->find(token)) {
      out.push_back(*v);
    } else {
      out.push_back(Tensor({table_->dim}));  // OOV rule: zero vector
    }
  }
  return out;
}

std::string StaticEmbedder::describe() const {
  return label_ + "(dim " + std::to_string(dim()) + ")";
}

StackedEmbedder::StackedEmbedder(
    std::vector<std::shared_ptr<const Embedder>> parts)
    : parts_(std::move(parts)) {
  if (parts_.empty()) {
    throw ConfigError("stacked embedder needs at least one part");
  }
  for (const auto& p : parts_) dim_ += p->dim();
}

std::vector<Tensor> StackedEmbedder::embed(const Sentence& s) const {
  std::vector<std::vector<Tensor>> per_part;
  per_part.reserve(parts_.size());
  for (const auto& p : parts_) per_part.push_back(p->embed(s));

  std::vector<Tensor> out;
  out.reserve(s.tokens.size());
  for (std::size_t t = 0; t < s.tokens.size(); ++t) {
    Tensor v({dim_});
    std::size_t offset = 0;
    for (const auto& vectors : per_part) {
      const Tensor& piece = vectors[t];
      std::copy(piece.data(), piece.data() + piece.size(), v.data() + offset);
      offset += piece.size();
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::string StackedEmbedder::describe() const {
  std::string s = "stack[";
  for (std::size_t i = 0; i < parts_.size(); ++i) {
    if (i) s += " + ";
    s += parts_[i]->describe();
  }
  return s + "]";
}

}  // namespace csem
