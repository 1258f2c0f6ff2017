#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "kga/corpus.hpp"
#include "kga/param_store.hpp"

namespace kga {

struct WalkConfig {
    std::size_t walks_per_entity = 8;
    std::size_t depth = 4;  // edges traversed per walk
    std::uint64_t seed = 1;
};

// Token sequences alternating entity and relation names. Every consecutive
// (entity, relation, entity) triple exists in the graph; dead ends truncate
// the walk.
std::vector<std::vector<std::string>> generate_walks(const KnowledgeGraph& graph,
                                                     const WalkConfig& config);

struct EmbeddingMatrix {
    std::size_t dim = 0;
    std::vector<std::string> ids;  // sorted
    std::vector<std::vector<double>> vectors;

    bool has(const std::string& id) const;
    const std::vector<double>& vec(const std::string& id) const;  // NotFound names the id
    std::size_t index_of(const std::string& id) const;
    void insert(const std::string& id, std::vector<double> v);

    // keep only ids accepted by the predicate
    EmbeddingMatrix filtered(const std::function<bool(const std::string&)>& keep) const;

  private:
    std::unordered_map<std::string, std::size_t> index_;
};

struct SkipgramConfig {
    std::size_t dim = 16;
    std::size_t window = 3;
    std::size_t negative_samples = 5;
    std::size_t epochs = 12;
    double learning_rate = 0.05;
    std::uint64_t seed = 1;
};

// Loss and analytic gradients of one skip-gram term with negative sampling:
//   -log s(v.u_pos) - sum_k log s(-v.u_neg_k)
// The trainer applies these gradients; the tests difference them.
struct SkipgramTermGrads {
    double loss = 0.0;
    std::vector<double> d_center;
    std::vector<double> d_context;
    std::vector<std::vector<double>> d_negatives;
};
SkipgramTermGrads skipgram_term(std::span<const double> center, std::span<const double> context,
                                const std::vector<std::vector<double>>& negatives);

// Skip-gram with negative sampling over token sequences (graph walks or
// plain sentences). Deterministic under config.seed; returns the input-side
// vectors. Mean per-pair loss per epoch goes to `epoch_loss` when given.
EmbeddingMatrix train_skipgram(const std::vector<std::vector<std::string>>& sequences,
                               const SkipgramConfig& config,
                               std::vector<double>* epoch_loss = nullptr);

struct Neighbor {
    std::string id;
    double cosine = 0.0;
};

// Top-k by cosine, query excluded, ties broken by lexicographic id.
std::vector<Neighbor> nearest_neighbors(const EmbeddingMatrix& embeddings,
                                        const std::string& query_id, std::size_t k);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

// "KGAE1" files: header line `KGAE1 dim count`, then `id v1 ... vdim` rows.
void export_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& path);
EmbeddingMatrix import_embeddings(const std::filesystem::path& path,
                                  std::size_t expected_dim = 0);

}  // namespace kga
