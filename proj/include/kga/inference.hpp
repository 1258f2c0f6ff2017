#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "kga/cgm.hpp"
#include "kga/corpus.hpp"
#include "kga/kb_embed.hpp"
#include "kga/lm.hpp"

namespace kga {

// (unseen word, closest seen word) row-copy constraint, triggered only when
// the unseen object's entity is among the image's annotations.
struct TransferRule {
    std::string unseen_word;
    std::string closest_word;
    std::string unseen_entity;
};

// Argmax cosine over the seen candidates, ties by lexicographic token.
std::string closest_seen_word(const std::string& unseen_word,
                              const EmbeddingMatrix& word_embeddings,
                              const std::vector<std::string>& seen_words);

// word -> image feature column, from the world's word-label inventory.
struct LabelColumns {
    std::unordered_map<std::string, std::size_t> columns;

    static LabelColumns from_world(const World& world);
    std::optional<std::size_t> column(const std::string& word) const;
};

struct TransferOptions {
    // Copy W_h2[unseen,:] too, so the unseen word starts at logit parity
    // with its sibling instead of keeping its trained-down textual row.
    bool copy_textual_row = true;
    // Move the sibling's self-feature weight onto the unseen word's own
    // feature column: W_I[unseen, col(unseen)] = W_I[closest, col(closest)].
    // Without it the unseen word's logit cannot exceed the sibling's.
    bool remap_self_feature = true;
};

// Rows currently under an active override; guards against overlapping
// transfers within one sample.
using OverrideRegistry = std::set<std::pair<std::string, std::size_t>>;

// Reversible row transfer. Release restores every touched entry bitwise;
// the destructor releases if still active.
class ScopedOverride {
  public:
    ScopedOverride() = default;
    ScopedOverride(ScopedOverride&& other) noexcept;
    ScopedOverride& operator=(ScopedOverride&& other) noexcept;
    ScopedOverride(const ScopedOverride&) = delete;
    ScopedOverride& operator=(const ScopedOverride&) = delete;
    ~ScopedOverride();

    void release();
    bool active() const { return params_ != nullptr; }

  private:
    friend ScopedOverride apply_transfer(CGMParams&, const TransferRule&, const Vocabulary&,
                                         const LabelColumns&, const TransferOptions&,
                                         OverrideRegistry*);
    struct SavedRow {
        std::string tensor;
        std::size_t row;
        std::vector<double> values;
    };
    struct SavedCell {
        std::string tensor;
        std::size_t row;
        std::size_t col;
        double value;
    };
    CGMParams* params_ = nullptr;
    OverrideRegistry* registry_ = nullptr;
    std::vector<SavedRow> rows_;
    std::vector<SavedCell> cells_;
    std::vector<std::pair<std::string, std::size_t>> locks_;
};

// Copies W_c and W_I rows from the closest word to the unseen word, zeroes
// the two mutual-dependency cells W_I[unseen, col(closest)] and
// W_I[closest, col(unseen)] (skipped with a note when a word has no feature
// column), and applies the options above. Overlapping overrides on the same
// rows are a contract violation when a registry is shared.
ScopedOverride apply_transfer(CGMParams& params, const TransferRule& rule,
                              const Vocabulary& vocab, const LabelColumns& columns,
                              const TransferOptions& options = {},
                              OverrideRegistry* registry = nullptr);

struct GenerateConfig {
    std::size_t beam_width = 1;
    std::size_t max_len = 12;
    bool ci_enabled = true;
    // Recompute the trigger step's distribution under the fresh override so
    // the unseen word can win immediately; false defers the effect to the
    // following steps.
    bool recompute_trigger_step = true;
    TransferOptions transfer;
};

struct GenerationResult {
    std::vector<std::string> tokens;  // no BOS/EOS
    double log_prob = 0.0;
    bool truncated = false;  // hit max_len without EOS
    StepTrace trace;
    std::vector<TransferRule> fired_rules;
};

// Length-capped beam search from BOS to EOS. When a live hypothesis's top
// token equals some rule's closest word, the rule's unseen entity is in the
// image annotations, and CI is on, the transfer fires (once per rule per
// sample) and decoding continues under the override; all overrides are
// released before returning. The caller must hold exclusive access to
// `cgm` for the duration of the call.
GenerationResult generate(const LMParams& lm, CGMParams& cgm, const CGMConfig& cgm_config,
                          const ImageRecord& image, const std::vector<TransferRule>& rules,
                          const GenerateConfig& config, const Vocabulary& vocab,
                          const EmbeddingMatrix& entity_embeddings, const LabelColumns& columns);

}  // namespace kga
