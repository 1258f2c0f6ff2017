#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kga/corpus.hpp"
#include "kga/kb_embed.hpp"
#include "kga/lm.hpp"
#include "kga/param_store.hpp"

namespace kga {

struct CGMDims {
    std::size_t vocab = 0;       // vs: rows of the three fusion matrices
    std::size_t hidden = 0;      // H: top LSTM layer width
    std::size_t entity_dim = 0;  // E
    std::size_t image_dim = 0;   // I: word-label inventory size
};

// Trainable caption-model tensors: W_he (H x E bilinear attention),
// W_h2 (vs x H), W_c (vs x E), W_I (vs x I). The language model they sit on
// stays frozen.
struct CGMParams {
    CGMDims dims;
    ParamStore store;
};

CGMParams init_cgm(const CGMDims& dims, std::uint64_t seed);

struct CGMConfig {
    bool enable_esa = true;
    bool enable_ci = true;  // consumed by inference
    std::size_t max_caption_len = 12;
};

struct EsaResult {
    std::vector<double> scores;   // tanh(h^T W_he e_i), in (-1, 1)
    std::vector<double> weights;  // beta, softmax of scores; empty when L = 0
    std::vector<double> context;  // sum_i beta_i e_i; zero vector when L = 0
};

// Soft attention over entity vectors conditioned on the hidden state.
EsaResult esa_attend(std::span<const double> hidden,
                     const std::vector<std::vector<double>>& entity_vectors, const Tensor& w_he);

// Three-term linear fusion, no bias: W_h2 h + W_c c + W_I i. Disabling ESA
// drops the W_c term.
std::vector<double> tsv_fuse(const CGMParams& params, std::span<const double> hidden,
                             std::span<const double> context, std::span<const double> image,
                             bool esa_enabled);

struct StepRecord {
    std::vector<double> attention;     // beta over the image's entity labels
    std::vector<double> context;
    std::vector<double> distribution;  // p over the vocabulary
};

struct StepTrace {
    std::vector<std::string> entity_labels;  // row order for attention dumps
    std::vector<std::string> emitted_tokens; // column order; excludes BOS/EOS
    std::vector<StepRecord> steps;           // one per prediction step
    bool truncated = false;
};

// Teacher-forced pass over one image-caption pair; step t consumes token t
// (BOS first) and predicts token t+1. Entities without embeddings raise
// NotFound naming the entity.
StepTrace cgm_forward(const LMParams& lm, const CGMParams& cgm, const CGMConfig& config,
                      const ImageRecord& image, const std::vector<std::string>& caption_tokens,
                      const Vocabulary& vocab, const EmbeddingMatrix& entity_embeddings);

// Mean over samples of summed token NLL (the training objective), with
// analytic gradients for the four trainable matrices when grads is given.
double cgm_batch_loss(const LMParams& lm, const CGMParams& cgm, bool esa_enabled,
                      const std::vector<const PairedExample*>& batch, const Vocabulary& vocab,
                      const EmbeddingMatrix& entity_embeddings, ParamStore* grads);

struct CGMTrainConfig {
    std::size_t epochs = 6;
    std::size_t batch_size = 16;
    double learning_rate = 5e-3;
    double clip_norm = 1.0;
    std::uint64_t seed = 1;
    bool enable_esa = true;
};

// Adam plus global-norm clipping on the four matrices only; throws
// ContractViolation unless every LM tensor is frozen.
void train_cgm(const LMParams& lm, CGMParams& cgm, const std::vector<PairedExample>& train_split,
               const Vocabulary& vocab, const EmbeddingMatrix& entity_embeddings,
               const CGMTrainConfig& config, const EpochCallback& on_epoch = {});

// Mean per-token NLL of reference captions under the model (no CI).
double mean_test_nll(const LMParams& lm, const CGMParams& cgm, bool esa_enabled,
                     const std::vector<PairedExample>& split, const Vocabulary& vocab,
                     const EmbeddingMatrix& entity_embeddings);

// CSV attention matrix: rows = entity labels, columns = emitted tokens,
// cells = beta. Columns each sum to 1; an empty entity set writes only the
// header.
void dump_attention(const StepTrace& trace, const std::filesystem::path& path);

struct AttentionCsv {
    std::vector<std::string> entity_labels;
    std::vector<std::string> tokens;
    std::vector<std::vector<double>> matrix;  // [entity][token]
};
AttentionCsv read_attention_csv(const std::filesystem::path& path);

}  // namespace kga
