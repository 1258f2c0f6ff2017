#include "kga/cgm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "kga/errors.hpp"
#include "kga/rng.hpp"
#include "kga/weights_io.hpp"

namespace kga {

CGMParams init_cgm(const CGMDims& dims, std::uint64_t seed) {
    if (dims.vocab < 2 || dims.hidden == 0 || dims.entity_dim == 0 || dims.image_dim == 0) {
        throw InvalidArgument("init_cgm: bad dimensions");
    }
    CGMParams params;
    params.dims = dims;
    Rng rng(seed);
    auto uniform_tensor = [&](std::vector<std::size_t> shape) {
        Tensor t = Tensor::zeros(std::move(shape));
        for (double& x : t.values) x = rng.uniform(-0.08, 0.08);
        return t;
    };
    params.store.add("W_he", uniform_tensor({dims.hidden, dims.entity_dim}));
    params.store.add("W_h2", uniform_tensor({dims.vocab, dims.hidden}));
    params.store.add("W_c", uniform_tensor({dims.vocab, dims.entity_dim}));
    params.store.add("W_I", uniform_tensor({dims.vocab, dims.image_dim}));
    return params;
}

EsaResult esa_attend(std::span<const double> hidden,
                     const std::vector<std::vector<double>>& entity_vectors, const Tensor& w_he) {
    if (hidden.size() != w_he.rows()) throw InvalidArgument("esa_attend: hidden dim mismatch");
    EsaResult out;
    const std::size_t entity_dim = w_he.cols();
    out.context.assign(entity_dim, 0.0);
    if (entity_vectors.empty()) return out;  // no annotations: empty beta, zero context

    // h^T W_he once, then one dot per entity
    const std::vector<double> h_we = matvec_transposed(w_he, hidden);
    out.scores.reserve(entity_vectors.size());
    for (const auto& e : entity_vectors) {
        if (e.size() != entity_dim) throw InvalidArgument("esa_attend: entity dim mismatch");
        out.scores.push_back(std::tanh(dot(h_we, e)));
    }
    out.weights = softmax(out.scores);
    for (std::size_t i = 0; i < entity_vectors.size(); ++i) {
        axpy(out.weights[i], entity_vectors[i], out.context);
    }
    return out;
}

std::vector<double> tsv_fuse(const CGMParams& params, std::span<const double> hidden,
                             std::span<const double> context, std::span<const double> image,
                             bool esa_enabled) {
    std::vector<double> logits = matvec(params.store.get("W_h2"), hidden);
    if (esa_enabled) {
        const std::vector<double> semantic = matvec(params.store.get("W_c"), context);
        for (std::size_t i = 0; i < logits.size(); ++i) logits[i] += semantic[i];
    }
    const std::vector<double> visual = matvec(params.store.get("W_I"), image);
    for (std::size_t i = 0; i < logits.size(); ++i) logits[i] += visual[i];
    return logits;
}

namespace {

std::vector<std::vector<double>> resolve_entities(const ImageRecord& image,
                                                  const EmbeddingMatrix& entity_embeddings) {
    std::vector<std::vector<double>> vectors;
    vectors.reserve(image.gold_entity_labels.size());
    for (const auto& id : image.gold_entity_labels) vectors.push_back(entity_embeddings.vec(id));
    return vectors;
}

}  // namespace

StepTrace cgm_forward(const LMParams& lm, const CGMParams& cgm, const CGMConfig& config,
                      const ImageRecord& image, const std::vector<std::string>& caption_tokens,
                      const Vocabulary& vocab, const EmbeddingMatrix& entity_embeddings) {
    if (image.features.size() != cgm.dims.image_dim) {
        throw InvalidArgument("cgm_forward: image feature dim mismatch");
    }
    const auto entity_vectors = resolve_entities(image, entity_embeddings);

    const std::vector<std::size_t> caption_ids = tokens_to_ids(caption_tokens, vocab);
    std::vector<std::size_t> inputs{Vocabulary::kBos};
    inputs.insert(inputs.end(), caption_ids.begin(), caption_ids.end());
    const auto hidden = lm_forward(lm, inputs);

    StepTrace trace;
    // without ESA there are no attention rows to dump
    if (config.enable_esa) trace.entity_labels = image.gold_entity_labels;
    trace.emitted_tokens = caption_tokens;
    for (const auto& h : hidden) {
        StepRecord rec;
        EsaResult esa;
        if (config.enable_esa) {
            esa = esa_attend(h, entity_vectors, cgm.store.get("W_he"));
        } else {
            esa.context.assign(cgm.dims.entity_dim, 0.0);
        }
        rec.attention = esa.weights;
        rec.context = esa.context;
        rec.distribution = softmax(tsv_fuse(cgm, h, esa.context, image.features,
                                            config.enable_esa));
        trace.steps.push_back(std::move(rec));
    }
    return trace;
}

double cgm_batch_loss(const LMParams& lm, const CGMParams& cgm, bool esa_enabled,
                      const std::vector<const PairedExample*>& batch, const Vocabulary& vocab,
                      const EmbeddingMatrix& entity_embeddings, ParamStore* grads) {
    if (batch.empty()) throw InvalidArgument("cgm_batch_loss: empty batch");
    const Tensor& w_he = cgm.store.get("W_he");
    const Tensor& w_c = cgm.store.get("W_c");
    Tensor* d_he = nullptr;
    Tensor* d_h2 = nullptr;
    Tensor* d_c = nullptr;
    Tensor* d_i = nullptr;
    if (grads != nullptr) {
        if (!grads->has("W_he")) {
            for (const auto& name : cgm.store.names()) {
                grads->add(name, Tensor::zeros(cgm.store.get(name).shape));
            }
        }
        for (const auto& name : grads->names()) grads->get(name).fill(0.0);
        d_he = &grads->get("W_he");
        d_h2 = &grads->get("W_h2");
        d_c = &grads->get("W_c");
        d_i = &grads->get("W_I");
    }

    // mean over samples of summed token NLL
    const double scale = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (const PairedExample* ex : batch) {
        if (ex->image.features.size() != cgm.dims.image_dim) {
            throw InvalidArgument("cgm_batch_loss: image feature dim mismatch");
        }
        const auto entity_vectors = resolve_entities(ex->image, entity_embeddings);
        const std::span<const double> image_features(ex->image.features);

        const std::vector<std::size_t> caption_ids = tokens_to_ids(ex->caption.tokens, vocab);
        std::vector<std::size_t> inputs{Vocabulary::kBos};
        inputs.insert(inputs.end(), caption_ids.begin(), caption_ids.end());
        std::vector<std::size_t> targets(caption_ids);
        targets.push_back(Vocabulary::kEos);

        const auto hidden = lm_forward(lm, inputs);
        for (std::size_t t = 0; t < hidden.size(); ++t) {
            const std::span<const double> h(hidden[t]);
            EsaResult esa;
            const bool use_esa = esa_enabled && !entity_vectors.empty();
            if (use_esa) {
                esa = esa_attend(h, entity_vectors, w_he);
            } else {
                esa.context.assign(cgm.dims.entity_dim, 0.0);
            }
            std::vector<double> p =
                softmax(tsv_fuse(cgm, h, esa.context, image_features, esa_enabled));
            loss += -std::log(std::max(p[targets[t]], 1e-300)) * scale;
            if (grads == nullptr) continue;

            // d loss / d logits
            p[targets[t]] -= 1.0;
            for (double& v : p) v *= scale;
            add_scaled_outer(*d_h2, 1.0, p, h);
            add_scaled_outer(*d_i, 1.0, p, image_features);
            if (esa_enabled) add_scaled_outer(*d_c, 1.0, p, esa.context);
            if (use_esa) {
                // back through c = sum beta_i e_i and the score softmax
                const std::vector<double> dc = matvec_transposed(w_c, p);
                const std::size_t L = entity_vectors.size();
                std::vector<double> d_beta(L);
                for (std::size_t i = 0; i < L; ++i) d_beta[i] = dot(entity_vectors[i], dc);
                double mix = 0.0;
                for (std::size_t i = 0; i < L; ++i) mix += esa.weights[i] * d_beta[i];
                for (std::size_t i = 0; i < L; ++i) {
                    const double d_score = esa.weights[i] * (d_beta[i] - mix);
                    const double d_raw = d_score * (1.0 - esa.scores[i] * esa.scores[i]);
                    add_scaled_outer(*d_he, d_raw, h, entity_vectors[i]);
                }
            }
        }
    }
    return loss;
}

void train_cgm(const LMParams& lm, CGMParams& cgm, const std::vector<PairedExample>& train_split,
               const Vocabulary& vocab, const EmbeddingMatrix& entity_embeddings,
               const CGMTrainConfig& config, const EpochCallback& on_epoch) {
    for (const auto& name : lm.store.names()) {
        if (!lm.store.is_frozen(name)) {
            throw ContractViolation("train_cgm: language model tensor not frozen: " + name);
        }
    }
    if (train_split.empty()) throw InvalidArgument("train_cgm: empty training split");
    if (config.batch_size == 0) throw InvalidArgument("train_cgm: batch_size must be >= 1");

    Rng rng(config.seed);
    AdamState adam;
    adam.hyper.learning_rate = config.learning_rate;
    ParamStore grads;
    std::vector<std::size_t> order(train_split.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            std::vector<const PairedExample*> batch;
            batch.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) batch.push_back(&train_split[order[i]]);
            const double loss = cgm_batch_loss(lm, cgm, config.enable_esa, batch, vocab,
                                               entity_embeddings, &grads);
            if (!std::isfinite(loss)) {
                throw Error("train_cgm: loss became non-finite at epoch " +
                            std::to_string(epoch));
            }
            epoch_loss += loss;
            ++batches;
            clip_global_norm(grads, config.clip_norm);
            adam_step(cgm.store, grads, adam);
        }
        if (on_epoch) on_epoch(epoch, epoch_loss / static_cast<double>(batches));
    }
}

double mean_test_nll(const LMParams& lm, const CGMParams& cgm, bool esa_enabled,
                     const std::vector<PairedExample>& split, const Vocabulary& vocab,
                     const EmbeddingMatrix& entity_embeddings) {
    if (split.empty()) throw InvalidArgument("mean_test_nll: empty split");
    CGMConfig config;
    config.enable_esa = esa_enabled;
    double total = 0.0;
    std::size_t tokens = 0;
    for (const auto& ex : split) {
        StepTrace trace =
            cgm_forward(lm, cgm, config, ex.image, ex.caption.tokens, vocab, entity_embeddings);
        std::vector<std::size_t> targets = tokens_to_ids(ex.caption.tokens, vocab);
        targets.push_back(Vocabulary::kEos);
        for (std::size_t t = 0; t < trace.steps.size(); ++t) {
            total += -std::log(std::max(trace.steps[t].distribution[targets[t]], 1e-300));
        }
        tokens += targets.size();
    }
    return total / static_cast<double>(tokens);
}

void dump_attention(const StepTrace& trace, const std::filesystem::path& path) {
    for (std::size_t t = 0; t < trace.emitted_tokens.size(); ++t) {
        if (trace.steps[t].attention.size() != trace.entity_labels.size()) {
            throw InvalidArgument("dump_attention: trace rows do not match its entity labels");
        }
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "entity";
    for (const auto& tok : trace.emitted_tokens) out << ',' << tok;
    out << '\n';
    for (std::size_t e = 0; e < trace.entity_labels.size(); ++e) {
        out << trace.entity_labels[e];
        for (std::size_t t = 0; t < trace.emitted_tokens.size(); ++t) {
            out << ',' << format_double(trace.steps[t].attention[e]);
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

AttentionCsv read_attention_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file");
    AttentionCsv csv;
    {
        std::istringstream header(line);
        std::string cell;
        if (!std::getline(header, cell, ',') || cell != "entity") {
            throw ParseError(path.string() + ": line 1: expected `entity` header");
        }
        while (std::getline(header, cell, ',')) csv.tokens.push_back(cell);
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream row(line);
        std::string cell;
        if (!std::getline(row, cell, ',')) {
            throw ParseError(path.string() + ": line " + std::to_string(line_no) + ": empty row");
        }
        csv.entity_labels.push_back(cell);
        std::vector<double> values;
        while (std::getline(row, cell, ',')) {
            try {
                values.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                                 ": bad number \"" + cell + "\"");
            }
        }
        if (values.size() != csv.tokens.size()) {
            throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                             ": expected " + std::to_string(csv.tokens.size()) + " cells");
        }
        csv.matrix.push_back(std::move(values));
    }
    return csv;
}

}  // namespace kga
