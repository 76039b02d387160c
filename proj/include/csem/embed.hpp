#pragma once

#include <memory>
#include <string>
#include <vector>

#include "csem/charlm.hpp"
#include "csem/corpus.hpp"
#include "csem/tensor.hpp"

namespace csem {

// Produces one fixed-width vector per token. Implementations are immutable
// after construction; embedding different sentences concurrently is safe.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<Tensor> embed(const Sentence& s) const = 0;
  virtual std::string describe() const = 0;
};

// Reads per-word vectors out of character-LM hidden states. The sentence is
// rendered as one character stream (leading boundary id, words joined by
// single spaces). A word's forward vector is the top-layer hidden state
// after its last character; its backward vector (when a backward LM is
// present) is the reversed-stream state after its first character. The
// per-word output concatenates the available directions.
class ContextualEmbedder final : public Embedder {
 public:
  explicit ContextualEmbedder(std::shared_ptr<const CharLM> forward,
                              std::shared_ptr<const CharLM> backward = nullptr,
                              std::string label = "contextual");

  std::size_t dim() const override;
  std::vector<Tensor> embed(const Sentence& s) const override;
  std::string describe() const override;

  const CharLM& forward_lm() const { return *forward_; }
  const CharLM* backward_lm() const { return backward_.get(); }

 private:
  std::shared_ptr<const CharLM> forward_;
  std::shared_ptr<const CharLM> backward_;
  std::string label_;
};

// Exact-match lookup into a static word-vector table; out-of-vocabulary
// words embed as zero vectors.
class StaticEmbedder final : public Embedder {
 public:
  explicit StaticEmbedder(std::shared_ptr<const StaticWordTable> table,
                          std::string label = "static");

  std::size_t dim() const override { return table_->dim; }
  std::vector<Tensor> embed(const Sentence& s) const override;
  std::string describe() const override;

 private:
  std::shared_ptr<const StaticWordTable> table_;
  std::string label_;
};

// Concatenates the outputs of its parts, in construction order.
class StackedEmbedder final : public Embedder {
 public:
  explicit StackedEmbedder(
      std::vector<std::shared_ptr<const Embedder>> parts);

  std::size_t dim() const override { return dim_; }
  std::vector<Tensor> embed(const Sentence& s) const override;
  std::string describe() const override;
  const std::vector<std::shared_ptr<const Embedder>>& parts() const {
    return parts_;
  }

 private:
  std::vector<std::shared_ptr<const Embedder>> parts_;
  std::size_t dim_ = 0;
};

}  // namespace csem
