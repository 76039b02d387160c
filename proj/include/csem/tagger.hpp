#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "csem/corpus.hpp"
#include "csem/crf.hpp"
#include "csem/embed.hpp"
#include "csem/nn.hpp"
#include "csem/schedule.hpp"

namespace csem {

// Tag string <-> id bijection over ids 0..K-1; the CRF's virtual START/STOP
// tags live past K and are never emitted.
struct TagSet {
  std::vector<std::string> tags;

  static TagSet from_data(const std::vector<TaggedSentence>& data);
  static TagSet from_tags(std::vector<std::string> tags);

  std::size_t size() const { return tags.size(); }
  // -1 when the tag is unknown.
  int id(const std::string& tag) const;
  const std::string& tag(int id) const {
    return tags[static_cast<std::size_t>(id)];
  }

 private:
  std::unordered_map<std::string, int> ids_;
};

struct TaggerConfig {
  int hidden = 64;  // per direction; the reference configuration uses 256
  double lr0 = 0.1;
  int epochs = 200;
  int batch = 32;
  double anneal_factor = 0.5;  // multiplier applied to lr on anneal
  int patience = 3;
  double dropout = 0.05;  // locked word-level dropout before the BiLSTM
  double clip = 5.0;

  void validate() const;
};

// BiLSTM-CRF sequence tagger over frozen stacked embeddings: word-level
// forward/backward LSTMs, a projection onto tag scores, and a linear-chain
// CRF on top.
class CrfTagger {
 public:
  CrfTagger() = default;
  CrfTagger(TaggerConfig config, TagSet tags,
            std::shared_ptr<const Embedder> embedder, std::uint64_t seed);

  // Emission scores [n x K] for already-embedded words (no dropout).
  Tensor emissions(const std::vector<Tensor>& word_vecs) const;
  std::vector<std::string> predict(const Sentence& s) const;

  // Gold ids for a sentence; unknown tags raise DataError naming the tag and
  // the sentence.
  std::vector<int> tag_ids(const TaggedSentence& s) const;

  void set_embedder(std::shared_ptr<const Embedder> embedder);

  TaggerConfig config;
  TagSet tagset;
  std::shared_ptr<const Embedder> embedder;
  std::size_t embed_dim = 0;
  LstmParams fwd, bwd;   // word-level, input embed_dim, hidden per direction
  LinearParams proj;     // [K x 2 hidden]
  Tensor transitions;    // [(K+2) x (K+2)], START/STOP masked
};

struct TagReport {
  struct Row {
    std::string tag;
    long tp = 0, fp = 0, fn = 0;
    double precision = 0, recall = 0, f1 = 0;
  };
  std::vector<Row> rows;  // tags with any gold or predicted occurrence
  long correct = 0, total = 0;
  double micro_f1 = 0;  // equals token accuracy for single-label tagging

  // Aligned text table: tag, precision, recall, F1, then a micro-F1 row.
  std::string render() const;
};

// Mini-batch SGD on the mean CRF negative log likelihood with patience-based
// annealing on dev micro-F1; the best-dev weights are returned.
CrfTagger train_tagger(const TaggerConfig& config,
                       std::shared_ptr<const Embedder> embedder,
                       const std::vector<TaggedSentence>& train,
                       const std::vector<TaggedSentence>& dev,
                       std::uint64_t seed, HeadTrainLog* log = nullptr);

TagReport evaluate_tagger(const CrfTagger& tagger,
                          const std::vector<TaggedSentence>& test);

}  // namespace csem
