#include "kga/kb_embed.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "kga/errors.hpp"
#include "kga/rng.hpp"
#include "kga/weights_io.hpp"

namespace kga {

std::vector<std::vector<std::string>> generate_walks(const KnowledgeGraph& graph,
                                                     const WalkConfig& config) {
    if (graph.entities.empty()) throw InvalidArgument("generate_walks: empty graph");
    if (config.walks_per_entity == 0 || config.depth == 0) {
        throw InvalidArgument("generate_walks: walks_per_entity and depth must be positive");
    }
    // adjacency in edge order for determinism
    std::map<std::string, std::vector<const GraphEdge*>> adjacency;
    for (const auto& e : graph.edges) adjacency[e.subject].push_back(&e);

    Rng rng(config.seed);
    std::vector<std::vector<std::string>> walks;
    walks.reserve(graph.entities.size() * config.walks_per_entity);
    for (const auto& start : graph.entities) {
        for (std::size_t w = 0; w < config.walks_per_entity; ++w) {
            std::vector<std::string> walk{start};
            std::string current = start;
            for (std::size_t step = 0; step < config.depth; ++step) {
                auto it = adjacency.find(current);
                if (it == adjacency.end() || it->second.empty()) break;  // dead end
                const GraphEdge* edge = it->second[rng.uniform_index(it->second.size())];
                walk.push_back(edge->relation);
                walk.push_back(edge->object);
                current = edge->object;
            }
            walks.push_back(std::move(walk));
        }
    }
    return walks;
}

bool EmbeddingMatrix::has(const std::string& id) const { return index_.count(id) > 0; }

const std::vector<double>& EmbeddingMatrix::vec(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw NotFound("no embedding for id: " + id);
    return vectors[it->second];
}

std::size_t EmbeddingMatrix::index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw NotFound("no embedding for id: " + id);
    return it->second;
}

void EmbeddingMatrix::insert(const std::string& id, std::vector<double> v) {
    if (dim == 0) dim = v.size();
    if (v.size() != dim) throw InvalidArgument("embedding dimension mismatch for id " + id);
    if (index_.count(id)) throw InvalidArgument("duplicate embedding id: " + id);
    index_.emplace(id, ids.size());
    ids.push_back(id);
    vectors.push_back(std::move(v));
}

EmbeddingMatrix EmbeddingMatrix::filtered(
    const std::function<bool(const std::string&)>& keep) const {
    EmbeddingMatrix out;
    out.dim = dim;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (keep(ids[i])) out.insert(ids[i], vectors[i]);
    }
    return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InvalidArgument("cosine: dimension mismatch");
    const double num = dot(a, b);
    const double den = std::sqrt(dot(a, a)) * std::sqrt(dot(b, b));
    if (den == 0.0) return 0.0;
    return num / den;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

SkipgramTermGrads skipgram_term(std::span<const double> center, std::span<const double> context,
                                const std::vector<std::vector<double>>& negatives) {
    SkipgramTermGrads out;
    out.d_center.assign(center.size(), 0.0);
    out.d_context.assign(center.size(), 0.0);

    const double pos_score = sigmoid(dot(center, context));
    out.loss = -std::log(std::max(pos_score, 1e-300));
    const double pos_coeff = pos_score - 1.0;  // d loss / d (v.u_pos)
    for (std::size_t i = 0; i < center.size(); ++i) {
        out.d_center[i] += pos_coeff * context[i];
        out.d_context[i] += pos_coeff * center[i];
    }
    for (const auto& neg : negatives) {
        const double neg_score = sigmoid(dot(center, std::span<const double>(neg)));
        out.loss += -std::log(std::max(1.0 - neg_score, 1e-300));
        std::vector<double> d_neg(center.size());
        for (std::size_t i = 0; i < center.size(); ++i) {
            out.d_center[i] += neg_score * neg[i];
            d_neg[i] = neg_score * center[i];
        }
        out.d_negatives.push_back(std::move(d_neg));
    }
    return out;
}

EmbeddingMatrix train_skipgram(const std::vector<std::vector<std::string>>& sequences,
                               const SkipgramConfig& config, std::vector<double>* epoch_loss) {
    if (sequences.empty()) throw InvalidArgument("train_skipgram: no sequences");
    if (config.window == 0) throw InvalidArgument("train_skipgram: window must be >= 1");
    if (config.dim == 0) throw InvalidArgument("train_skipgram: dim must be positive");

    // vocabulary and unigram counts, sorted for determinism
    std::map<std::string, std::size_t> counts;
    for (const auto& seq : sequences) {
        for (const auto& tok : seq) ++counts[tok];
    }
    if (counts.size() < 2) {
        throw InvalidArgument("train_skipgram: need at least two distinct tokens for negatives");
    }
    std::vector<std::string> vocab;
    vocab.reserve(counts.size());
    for (const auto& [tok, n] : counts) {
        (void)n;
        vocab.push_back(tok);
    }
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < vocab.size(); ++i) index[vocab[i]] = i;

    // unigram^0.75 table for negative sampling
    std::vector<double> cumulative(vocab.size());
    double total = 0.0;
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        total += std::pow(static_cast<double>(counts[vocab[i]]), 0.75);
        cumulative[i] = total;
    }

    Rng rng(config.seed);
    const std::size_t v = vocab.size();
    const std::size_t d = config.dim;
    const double init_scale = 0.5 / static_cast<double>(d);
    std::vector<std::vector<double>> in(v, std::vector<double>(d));
    std::vector<std::vector<double>> out(v, std::vector<double>(d));
    for (auto& row : in) {
        for (double& x : row) x = rng.uniform(-init_scale, init_scale);
    }
    for (auto& row : out) {
        for (double& x : row) x = rng.uniform(-init_scale, init_scale);
    }

    auto draw_negative = [&](std::size_t avoid) {
        for (int attempt = 0; attempt < 8; ++attempt) {
            const double r = rng.uniform() * total;
            const std::size_t pick = static_cast<std::size_t>(
                std::lower_bound(cumulative.begin(), cumulative.end(), r) - cumulative.begin());
            if (pick != avoid && pick < v) return pick;
        }
        return (avoid + 1) % v;  // degenerate distribution fallback
    };

    std::vector<std::size_t> neg_ids(config.negative_samples);
    std::vector<std::vector<double>> neg_vecs;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        double loss_sum = 0.0;
        std::size_t pair_count = 0;
        for (const auto& seq : sequences) {
            for (std::size_t pos = 0; pos < seq.size(); ++pos) {
                const std::size_t center = index[seq[pos]];
                const std::size_t lo = pos >= config.window ? pos - config.window : 0;
                const std::size_t hi = std::min(seq.size(), pos + config.window + 1);
                for (std::size_t ctx_pos = lo; ctx_pos < hi; ++ctx_pos) {
                    if (ctx_pos == pos) continue;
                    const std::size_t context = index[seq[ctx_pos]];
                    neg_vecs.clear();
                    for (std::size_t k = 0; k < config.negative_samples; ++k) {
                        neg_ids[k] = draw_negative(context);
                        neg_vecs.push_back(out[neg_ids[k]]);
                    }
                    SkipgramTermGrads g = skipgram_term(in[center], out[context], neg_vecs);
                    loss_sum += g.loss;
                    ++pair_count;
                    const double lr = config.learning_rate;
                    for (std::size_t i = 0; i < d; ++i) {
                        in[center][i] -= lr * g.d_center[i];
                        out[context][i] -= lr * g.d_context[i];
                    }
                    for (std::size_t k = 0; k < config.negative_samples; ++k) {
                        for (std::size_t i = 0; i < d; ++i) {
                            out[neg_ids[k]][i] -= lr * g.d_negatives[k][i];
                        }
                    }
                }
            }
        }
        if (epoch_loss != nullptr) {
            epoch_loss->push_back(pair_count ? loss_sum / static_cast<double>(pair_count) : 0.0);
        }
    }

    EmbeddingMatrix matrix;
    matrix.dim = d;
    for (std::size_t i = 0; i < v; ++i) {
        check_finite(std::span<const double>(in[i]), "embedding for " + vocab[i]);
        matrix.insert(vocab[i], in[i]);
    }
    return matrix;
}

std::vector<Neighbor> nearest_neighbors(const EmbeddingMatrix& embeddings,
                                        const std::string& query_id, std::size_t k) {
    if (k == 0) throw InvalidArgument("nearest_neighbors: k must be >= 1");
    const std::vector<double>& q = embeddings.vec(query_id);
    std::vector<Neighbor> all;
    all.reserve(embeddings.ids.size());
    for (std::size_t i = 0; i < embeddings.ids.size(); ++i) {
        if (embeddings.ids[i] == query_id) continue;
        all.push_back({embeddings.ids[i], cosine_similarity(q, embeddings.vectors[i])});
    }
    std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
        if (a.cosine != b.cosine) return a.cosine > b.cosine;
        return a.id < b.id;
    });
    if (all.size() > k) all.resize(k);
    return all;
}

void export_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "KGAE1 " << matrix.dim << ' ' << matrix.ids.size() << '\n';
    for (std::size_t i = 0; i < matrix.ids.size(); ++i) {
        out << matrix.ids[i];
        for (double x : matrix.vectors[i]) out << ' ' << format_double(x);
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

EmbeddingMatrix import_embeddings(const std::filesystem::path& path, std::size_t expected_dim) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file");
    std::istringstream header(line);
    std::string magic;
    std::size_t dim = 0, count = 0;
    if (!(header >> magic >> dim >> count) || magic != "KGAE1" || dim == 0) {
        throw ParseError(path.string() + ": line 1: expected `KGAE1 dim count`");
    }
    if (expected_dim != 0 && dim != expected_dim) {
        throw InvalidArgument(path.string() + ": embedding dim " + std::to_string(dim) +
                              " does not match expected " + std::to_string(expected_dim));
    }
    EmbeddingMatrix matrix;
    matrix.dim = dim;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream row(line);
        std::string id;
        if (!(row >> id)) {
            throw ParseError(path.string() + ": line " + std::to_string(line_no) + ": missing id");
        }
        std::vector<double> v(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            if (!(row >> v[i])) {
                throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                                 ": expected " + std::to_string(dim) + " values");
            }
        }
        std::string trailing;
        if (row >> trailing) {
            throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                             ": trailing values");
        }
        matrix.insert(id, std::move(v));
    }
    if (matrix.ids.size() != count) {
        throw ParseError(path.string() + ": header promised " + std::to_string(count) +
                         " rows, found " + std::to_string(matrix.ids.size()));
    }
    return matrix;
}

}  // namespace kga
