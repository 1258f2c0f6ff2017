#pragma once

#include <cstdint>

#include "kga/cgm.hpp"
#include "kga/corpus.hpp"
#include "kga/inference.hpp"
#include "kga/kb_embed.hpp"
#include "kga/labelers.hpp"
#include "kga/lm.hpp"

namespace kga {

// End-to-end wiring shared by the CLI, the ablation harness and the tests.
struct PipelineConfig {
    std::size_t word_dim = 16;    // word vectors and LM embeddings
    std::size_t entity_dim = 16;  // entity vectors driving attention
    std::size_t hidden1 = 32;
    std::size_t hidden2 = 32;

    WalkConfig walks;
    SkipgramConfig entity_skipgram;  // dim is overridden by entity_dim
    SkipgramConfig word_skipgram;    // dim is overridden by word_dim
    LMTrainConfig lm_train;
    CGMTrainConfig cgm_train;

    // replace sampled image features with word-label classifier predictions
    bool classifier_features = false;
    MultiLabelTrainConfig classifier_train;
};

struct PipelineArtifacts {
    Vocabulary vocab;
    EmbeddingMatrix entity_embeddings;  // entity ids only
    EmbeddingMatrix word_embeddings;    // unpaired-text tokens
    LabelColumns columns;
    std::vector<TransferRule> rules;
};

// Vocabulary, graph-walk entity embeddings, unpaired-text word embeddings,
// and one transfer rule per held-out object (closest seen object word by
// word-vector cosine).
PipelineArtifacts build_artifacts(const World& world, const DatasetBundle& bundle,
                                  const PipelineConfig& config);

// Skip-gram-initialized language model pretrained on the bundle's unpaired
// text, returned frozen.
LMParams pretrain_language_model(const DatasetBundle& bundle, const PipelineArtifacts& artifacts,
                                 const PipelineConfig& config,
                                 const EpochCallback& on_epoch = {});

// Trains the word-label classifier on the paired training split and
// replaces image features everywhere with its sigmoid predictions.
void apply_classifier_features(World& world_unused, DatasetBundle& bundle,
                               const PipelineConfig& config);

CGMDims cgm_dims_for(const Vocabulary& vocab, const LMParams& lm,
                     const PipelineArtifacts& artifacts, const DatasetBundle& bundle);

}  // namespace kga
