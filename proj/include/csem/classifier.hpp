#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "csem/corpus.hpp"
#include "csem/embed.hpp"
#include "csem/nn.hpp"
#include "csem/schedule.hpp"

namespace csem {

struct LabelSet {
  std::vector<std::string> labels;

  static LabelSet from_data(const std::vector<LabeledText>& data);
  static LabelSet from_labels(std::vector<std::string> labels);

  std::size_t size() const { return labels.size(); }
  int id(const std::string& label) const;
  const std::string& label(int id) const {
    return labels[static_cast<std::size_t>(id)];
  }

 private:
  std::unordered_map<std::string, int> ids_;
};

struct ClassifierConfig {
  int hidden = 64;  // reference configuration uses 256
  double lr0 = 0.1;
  int epochs = 200;
  int batch = 32;
  double anneal_factor = 0.5;  // multiplier applied to lr on anneal
  int patience = 3;
  double clip = 5.0;

  void validate() const;
};

// Text classifier over frozen stacked embeddings: a GRU runs left to right
// over the word vectors, its final hidden state is the sentence embedding,
// and a linear layer maps that to class logits.
class GruClassifier {
 public:
  GruClassifier() = default;
  GruClassifier(ClassifierConfig config, LabelSet labels,
                std::shared_ptr<const Embedder> embedder, std::uint64_t seed);

  Tensor logits(const Sentence& s) const;
  // Argmax label; ties break toward the lowest class id.
  std::string predict(const Sentence& s) const;

  void set_embedder(std::shared_ptr<const Embedder> embedder);

  ClassifierConfig config;
  LabelSet labels;
  std::shared_ptr<const Embedder> embedder;
  std::size_t embed_dim = 0;
  GruParams gru;
  LinearParams out;  // [C x hidden]
};

struct ClsReport {
  double accuracy = 0;
  std::vector<std::string> labels;
  std::vector<long> confusion;  // [C x C] row-major, rows = gold
  long total = 0;

  long at(std::size_t gold, std::size_t pred) const {
    return confusion[gold * labels.size() + pred];
  }
  // Accuracy line plus a labeled confusion-matrix block.
  std::string render() const;
};

GruClassifier train_classifier(const ClassifierConfig& config,
                               std::shared_ptr<const Embedder> embedder,
                               const std::vector<LabeledText>& train,
                               const std::vector<LabeledText>& dev,
                               std::uint64_t seed, HeadTrainLog* log = nullptr);

ClsReport evaluate_classifier(const GruClassifier& model,
                              const std::vector<LabeledText>& test);

}  // namespace csem
