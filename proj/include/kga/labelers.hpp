#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "kga/corpus.hpp"
#include "kga/param_store.hpp"

namespace kga {

// Word labels of a caption: the tokens whose lexicon tag is NOUN, VERB or
// ADJ. Tokens missing from the lexicon count as OTHER and are skipped; the
// optional counter reports how many were.
std::set<std::string> extract_word_labels(const std::vector<std::string>& tokens,
                                          const Lexicon& lexicon,
                                          std::size_t* skipped = nullptr);

// Entity labels (ea) of a caption: entities of entity-bearing tokens in
// first-mention order, deduplicated.
std::vector<std::string> link_entities(const std::vector<std::string>& tokens,
                                       const Lexicon& lexicon);

// One linear layer plus sigmoid per label, trained with sigmoid
// cross-entropy.
struct MultiLabelClassifier {
    std::vector<std::string> labels;  // fixed at construction
    ParamStore store;                 // "weights" (labels x features), "bias" (labels)

    std::size_t feature_dim() const;
};

struct MultiLabelTrainConfig {
    std::size_t epochs = 40;
    double learning_rate = 0.05;
    std::uint64_t seed = 1;
};

MultiLabelClassifier init_multilabel(const std::vector<std::string>& labels,
                                     std::size_t feature_dim, std::uint64_t seed);

// Mean over examples and labels of -[y log s(z) + (1-y) log(1-s(z))], plus
// analytic gradients when grads is non-null. Shared by the trainer and the
// finite-difference tests.
double multilabel_loss(const MultiLabelClassifier& clf,
                       const std::vector<std::vector<double>>& features,
                       const std::vector<std::set<std::string>>& labelsets,
                       ParamStore* grads = nullptr);

// Full-batch Adam; every label must appear at least once in the labelsets.
void train_multilabel(MultiLabelClassifier& clf,
                      const std::vector<std::vector<double>>& features,
                      const std::vector<std::set<std::string>>& labelsets,
                      const MultiLabelTrainConfig& config,
                      std::vector<double>* epoch_loss = nullptr);

// Per-label sigmoid probabilities; no normalization across labels.
std::vector<double> predict_labels(const MultiLabelClassifier& clf,
                                   std::span<const double> features);

// Weights in the KGAW1 format plus a label-inventory sidecar JSONL.
void save_classifier(const MultiLabelClassifier& clf, const std::filesystem::path& weights_path,
                     const std::filesystem::path& labels_path);
MultiLabelClassifier load_classifier(const std::filesystem::path& weights_path,
                                     const std::filesystem::path& labels_path);

enum class AccuracyMode { FixedK, Adaptive };

struct AccuracyResult {
    double value = 0.0;      // mean over scored images of |top-K ∩ gold| / |gold|
    std::size_t scored = 0;
    std::size_t skipped = 0;  // images with empty gold sets
};

// Top-K ties break by ascending label index. Adaptive mode uses K = |gold|
// per image.
AccuracyResult accuracy_at_k(const std::vector<std::vector<double>>& predictions,
                             const std::vector<std::set<std::size_t>>& gold_label_indexes,
                             AccuracyMode mode, std::size_t k = 0);

}  // namespace kga
