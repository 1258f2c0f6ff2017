#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "kga/cgm.hpp"
#include "kga/corpus.hpp"
#include "kga/inference.hpp"
#include "kga/lm.hpp"

namespace kga {

struct F1Result {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t tp = 0, fp = 0, fn = 0;
};

// Presence-based F1 for one object word over generated vs reference
// captions keyed by image id. A mention is an exact token match of the
// object word or one of its aliases. Key sets must be identical.
F1Result novel_object_f1(const std::map<std::string, std::vector<std::string>>& generated,
                         const std::map<std::string, std::vector<std::string>>& references,
                         const std::string& object_word,
                         const std::vector<std::string>& aliases = {});

enum class AblationMode { None, OnlyESA, OnlyCI, EsaCi };

std::string ablation_mode_name(AblationMode mode);

struct AblationResult {
    AblationMode mode = AblationMode::None;
    std::size_t beam = 1;
    std::uint64_t seed = 0;
    std::map<std::string, F1Result> per_object;  // held-out word -> scores
    double mean_f1 = 0.0;
    double test_nll = 0.0;  // per-token, teacher-forced, CI plays no part
};

struct AblationConfig {
    CGMTrainConfig cgm_train;      // enable_esa is set per mode
    std::vector<std::size_t> beams = {1, 3};
    std::size_t max_len = 12;
    TransferOptions transfer;
};

// Trains the caption model with and without ESA on identical data and
// seeds, then evaluates each of the four modes at each beam width.
// The supplied language model must already be pretrained and frozen.
std::vector<AblationResult> ablation_run(const DatasetBundle& bundle, const LMParams& lm,
                                         const Vocabulary& vocab,
                                         const EmbeddingMatrix& entity_embeddings,
                                         const std::vector<TransferRule>& rules,
                                         const LabelColumns& columns,
                                         const AblationConfig& config,
                                         const std::vector<std::uint64_t>& seeds,
                                         const EpochCallback& on_epoch = {});

// Deterministic CSV + JSONL; the header states the substituted metrics.
// CSV columns: mode,k,object,precision,recall,f1,nll,seed with one `mean`
// row per (mode, k, seed).
void write_report(const std::vector<AblationResult>& results,
                  const std::filesystem::path& csv_path,
                  const std::filesystem::path& jsonl_path);

std::vector<AblationResult> read_report_jsonl(const std::filesystem::path& jsonl_path);

}  // namespace kga
