#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csem/corpus.hpp"
#include "csem/nn.hpp"
#include "csem/rng.hpp"
#include "csem/schedule.hpp"
#include "csem/tensor.hpp"

namespace csem {

struct CharLMConfig {
  int embed_dim = 100;
  int hidden = 64;    // reference configuration uses 1024
  int layers = 1;
  int seq_len = 50;   // reference 250
  int batch = 16;     // reference 100
  double lr0 = 20.0;
  double anneal_factor = 4.0;  // divisor applied to lr when patience runs out
  int patience = 25;           // checkpoints without improvement before anneal
  int epochs = 10;
  int shards = 1;      // checkpoints per epoch; state resets between shards
  double clip = 0.25;  // global gradient-norm clip
  std::size_t max_chars = 2000;  // dictionary cap when built from the corpus
  bool backward = false;         // train on the reversed character stream

  void validate() const;
};

// Character-level LSTM language model: char embedding, one or more LSTM
// layers, and a projection back onto the character vocabulary.
class CharLM {
 public:
  CharLM() = default;
  CharLM(CharLMConfig config, CharDictionary dict, Rng& rng);

  std::int32_t vocab() const { return dict.size(); }
  std::size_t hidden() const { return static_cast<std::size_t>(config.hidden); }

  CharLMConfig config;
  CharDictionary dict;
  Tensor embedding;                // [V x E]
  std::vector<LstmParams> layers;  // stacked, layer 0 reads the embedding
  LinearParams out;                // [V x H]
};

struct CharLMGrads {
  Tensor embedding;
  std::vector<LstmParams> layers;
  LinearParams out;
};

CharLMGrads make_grads(const CharLM& model);
void bind_refs(CharLM& model, CharLMGrads& grads, ParamRefs& refs);

// Batched hidden/cell state, one row per batch strip.
struct LmState {
  std::vector<Tensor> h, c;  // per layer, [batch x H]

  static LmState zeros(const CharLM& model, std::size_t batch);
  std::size_t batch() const { return h.empty() ? 0 : h[0].dim(0); }
};

struct IdMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<std::int32_t> ids;

  IdMatrix() = default;
  IdMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), ids(r * c, 0) {}
  std::int32_t at(std::size_t r, std::size_t c) const {
    return ids[r * cols + c];
  }
  std::int32_t& at(std::size_t r, std::size_t c) { return ids[r * cols + c]; }
};

// One truncated-BPTT step over a window of W character ids per row: positions
// 0..W-2 are inputs, each predicting the id one to its right. Returns the
// mean next-char loss over rows x (W-1) predictions. State is carried in
// place and treated as constant by the backward pass (gradients stop at the
// window boundary). Pass grads to accumulate parameter gradients of the mean
// loss; null runs forward only.
double lm_step(const CharLM& model, const IdMatrix& window, LmState& state,
               CharLMGrads* grads);

struct LmCheckpoint {
  long step = 0;
  double train_loss = 0;
  double valid_ppl = 0;
  double lr = 0;
};
using LmTrainLog = std::vector<LmCheckpoint>;

// Appends checkpoints as tab-separated "step loss ppl lr" lines.
void append_lm_log(const LmTrainLog& log, const std::string& path);

// The full training loop: shard checkpoints, validation perplexity, annealed
// learning rate, best-perplexity weights kept. When dict is null it is built
// from the training lines. The log (when given) starts with a step-0 row
// holding the untrained validation perplexity (train_loss is NaN there).
CharLM train_lm(const CharLMConfig& config,
                const std::vector<std::string>& train_lines,
                const std::vector<std::string>& valid_lines,
                std::uint64_t seed, LmTrainLog* log = nullptr,
                const CharDictionary* dict = nullptr);

// exp(mean per-character negative log likelihood), natural log. Each line is
// evaluated as its own stream with a leading boundary character and a fresh
// state. Multi-threaded evaluation shards lines across workers and combines
// counts, matching the single-threaded value to ~1e-15 relative.
double perplexity(const CharLM& model, const std::vector<std::string>& lines,
                  int threads = 1);

// Character stream for LM training: a leading boundary id, lines joined by
// boundary ids, reversed when the model runs backward.
std::vector<std::int32_t> lm_stream(const CharDictionary& dict,
                                    const std::vector<std::string>& lines,
                                    bool backward);

// Top-layer hidden states after consuming the id at each requested position
// (positions must be sorted ascending). Used for embedding extraction.
std::vector<Tensor> lm_hidden_states(const CharLM& model,
                                     const std::vector<std::int32_t>& ids,
                                     const std::vector<std::size_t>& positions);

}  // namespace csem
