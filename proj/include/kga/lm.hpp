#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "kga/corpus.hpp"
#include "kga/kb_embed.hpp"
#include "kga/param_store.hpp"

namespace kga {

struct LMDims {
    std::size_t vocab = 0;
    std::size_t embedding = 16;  // word vector width
    std::size_t hidden1 = 32;
    std::size_t hidden2 = 32;
};

// Two-layer forward LSTM language model. Tensors live in `store` under
// fixed names: embed, l1.Wx, l1.Wh, l1.b, l2.Wx, l2.Wh, l2.b, head.
// Gate rows are stacked [input, forget, candidate, output]. The softmax
// head is only used while pretraining on unpaired text.
struct LMParams {
    LMDims dims;
    ParamStore store;
};

// Uniform(-0.08, 0.08) init, forget-gate bias 1.0. When word_vectors is
// given, embedding rows start from those vectors (tokens missing from the
// matrix keep their random init).
LMParams init_lm(const LMDims& dims, std::uint64_t seed,
                 const EmbeddingMatrix* word_vectors = nullptr,
                 const Vocabulary* vocab = nullptr);

struct LstmState {
    std::vector<double> hidden;
    std::vector<double> cell;

    static LstmState zero(std::size_t hidden_dim);
};

// One step of one layer; `layer` is 1 or 2. Returns the new hidden vector
// and advances `state`.
std::vector<double> lstm_step(const LMParams& params, int layer, std::span<const double> input,
                              LstmState& state);

// Hidden sequence of the top layer for inputs starting at BOS; both layers
// start from zero states. Length of the output equals the input length.
std::vector<std::vector<double>> lm_forward(const LMParams& params,
                                            const std::vector<std::size_t>& token_ids);

// Mean per-token cross-entropy of next-token prediction over a batch of
// sentences (ids exclude BOS/EOS; they are added here). Accumulates
// analytic gradients for every LM tensor when grads is non-null.
double lm_loss(const LMParams& params, const std::vector<std::vector<std::size_t>>& sentences,
               ParamStore* grads);

struct LMTrainConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 16;
    double learning_rate = 3e-3;
    double clip_norm = 1.0;
    std::uint64_t seed = 1;
};

using EpochCallback = std::function<void(std::size_t epoch, double loss)>;

// Adam with global-norm clipping; freezes every LM tensor on return.
void pretrain_lm(LMParams& params, const std::vector<std::vector<std::string>>& corpus,
                 const Vocabulary& vocab, const LMTrainConfig& config,
                 const EpochCallback& on_epoch = {});

struct NllBreakdown {
    double total = 0.0;
    std::size_t tokens = 0;
    std::vector<double> per_token;  // negative log p of each target
};

// Per-token negative log likelihood of one sentence under the softmax head;
// targets are the sentence tokens then EOS (BOS is input only).
NllBreakdown sequence_nll(const LMParams& params, const std::vector<std::size_t>& sentence_ids);

double perplexity_from_nll(double total_nll, std::size_t token_count);

// exp(mean per-token NLL) over the corpus.
double perplexity(const LMParams& params, const std::vector<std::vector<std::string>>& corpus,
                  const Vocabulary& vocab);

std::vector<std::size_t> tokens_to_ids(const std::vector<std::string>& tokens,
                                       const Vocabulary& vocab);

}  // namespace kga
