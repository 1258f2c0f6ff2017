#include "kga/lm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kga/errors.hpp"
#include "kga/rng.hpp"

namespace kga {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct LayerView {
    const Tensor* wx;
    const Tensor* wh;
    const Tensor* b;
    std::size_t in_dim;
    std::size_t hidden;
};

LayerView layer_view(const LMParams& params, int layer) {
    if (layer != 1 && layer != 2) throw InvalidArgument("lstm layer must be 1 or 2");
    const std::string prefix = layer == 1 ? "l1." : "l2.";
    LayerView v;
    v.wx = &params.store.get(prefix + "Wx");
    v.wh = &params.store.get(prefix + "Wh");
    v.b = &params.store.get(prefix + "b");
    v.hidden = layer == 1 ? params.dims.hidden1 : params.dims.hidden2;
    v.in_dim = layer == 1 ? params.dims.embedding : params.dims.hidden1;
    if (v.wx->rows() != 4 * v.hidden || v.wx->cols() != v.in_dim ||
        v.wh->rows() != 4 * v.hidden || v.wh->cols() != v.hidden ||
        v.b->size() != 4 * v.hidden) {
        throw InvalidArgument("lstm gate tensor shapes inconsistent with dims");
    }
    return v;
}

// all gate activations of one step, kept for the backward pass
struct StepCache {
    std::vector<double> x, h_prev, c_prev;
    std::vector<double> gi, gf, gg, go, c, tanh_c, h;
};

void forward_step(const LayerView& layer, std::span<const double> x, LstmState& state,
                  StepCache* cache) {
    const std::size_t h = layer.hidden;
    if (x.size() != layer.in_dim || state.hidden.size() != h) {
        throw InvalidArgument("lstm_step: dimension mismatch");
    }
    std::vector<double> z = matvec(*layer.wx, x);
    std::vector<double> zh = matvec(*layer.wh, state.hidden);
    for (std::size_t i = 0; i < 4 * h; ++i) z[i] += zh[i] + layer.b->values[i];

    std::vector<double> gi(h), gf(h), gg(h), go(h), c(h), tanh_c(h), hidden(h);
    for (std::size_t i = 0; i < h; ++i) {
        gi[i] = sigmoid(z[i]);
        gf[i] = sigmoid(z[h + i]);
        gg[i] = std::tanh(z[2 * h + i]);
        go[i] = sigmoid(z[3 * h + i]);
        c[i] = gf[i] * state.cell[i] + gi[i] * gg[i];
        tanh_c[i] = std::tanh(c[i]);
        hidden[i] = go[i] * tanh_c[i];
    }
    if (cache != nullptr) {
        cache->x.assign(x.begin(), x.end());
        cache->h_prev = state.hidden;
        cache->c_prev = state.cell;
        cache->gi = gi;
        cache->gf = gf;
        cache->gg = gg;
        cache->go = go;
        cache->c = c;
        cache->tanh_c = tanh_c;
        cache->h = hidden;
    }
    state.cell = std::move(c);
    state.hidden = std::move(hidden);
}

struct LayerGrads {
    Tensor* wx;
    Tensor* wh;
    Tensor* b;
};

// Propagates (dh, dc) through one cached step. Adds the input gradient to
// dx and replaces dh/dc with the previous step's gradients.
void backward_step(const LayerView& layer, const StepCache& cache, std::vector<double>& dh,
                   std::vector<double>& dc, std::vector<double>& dx, const LayerGrads& grads) {
    const std::size_t h = layer.hidden;
    std::vector<double> dz(4 * h);
    for (std::size_t i = 0; i < h; ++i) {
        const double d_o = dh[i] * cache.tanh_c[i];
        const double dci = dc[i] + dh[i] * cache.go[i] * (1.0 - cache.tanh_c[i] * cache.tanh_c[i]);
        const double d_i = dci * cache.gg[i];
        const double d_f = dci * cache.c_prev[i];
        const double d_g = dci * cache.gi[i];
        dz[i] = d_i * cache.gi[i] * (1.0 - cache.gi[i]);
        dz[h + i] = d_f * cache.gf[i] * (1.0 - cache.gf[i]);
        dz[2 * h + i] = d_g * (1.0 - cache.gg[i] * cache.gg[i]);
        dz[3 * h + i] = d_o * cache.go[i] * (1.0 - cache.go[i]);
        dc[i] = dci * cache.gf[i];
    }
    add_scaled_outer(*grads.wx, 1.0, dz, cache.x);
    add_scaled_outer(*grads.wh, 1.0, dz, cache.h_prev);
    axpy(1.0, dz, grads.b->values);
    std::vector<double> dx_step = matvec_transposed(*layer.wx, dz);
    for (std::size_t i = 0; i < dx_step.size(); ++i) dx[i] += dx_step[i];
    dh = matvec_transposed(*layer.wh, dz);
}

}  // namespace

LstmState LstmState::zero(std::size_t hidden_dim) {
    LstmState s;
    s.hidden.assign(hidden_dim, 0.0);
    s.cell.assign(hidden_dim, 0.0);
    return s;
}

LMParams init_lm(const LMDims& dims, std::uint64_t seed, const EmbeddingMatrix* word_vectors,
                 const Vocabulary* vocab) {
    if (dims.vocab < 2 || dims.embedding == 0 || dims.hidden1 == 0 || dims.hidden2 == 0) {
        throw InvalidArgument("init_lm: bad dimensions");
    }
    LMParams params;
    params.dims = dims;
    Rng rng(seed);
    auto uniform_tensor = [&](std::vector<std::size_t> shape) {
        Tensor t = Tensor::zeros(std::move(shape));
        for (double& x : t.values) x = rng.uniform(-0.08, 0.08);
        return t;
    };
    params.store.add("embed", uniform_tensor({dims.vocab, dims.embedding}));
    params.store.add("l1.Wx", uniform_tensor({4 * dims.hidden1, dims.embedding}));
    params.store.add("l1.Wh", uniform_tensor({4 * dims.hidden1, dims.hidden1}));
    Tensor b1 = Tensor::zeros({4 * dims.hidden1});
    for (std::size_t i = dims.hidden1; i < 2 * dims.hidden1; ++i) b1.values[i] = 1.0;
    params.store.add("l1.b", std::move(b1));
    params.store.add("l2.Wx", uniform_tensor({4 * dims.hidden2, dims.hidden1}));
    params.store.add("l2.Wh", uniform_tensor({4 * dims.hidden2, dims.hidden2}));
    Tensor b2 = Tensor::zeros({4 * dims.hidden2});
    for (std::size_t i = dims.hidden2; i < 2 * dims.hidden2; ++i) b2.values[i] = 1.0;
    params.store.add("l2.b", std::move(b2));
    params.store.add("head", uniform_tensor({dims.hidden2, dims.vocab}));

    if (word_vectors != nullptr) {
        if (vocab == nullptr) throw InvalidArgument("init_lm: word vectors need a vocabulary");
        if (word_vectors->dim != dims.embedding) {
            throw InvalidArgument("init_lm: word vector dim does not match embedding dim");
        }
        Tensor& embed = params.store.get("embed");
        for (std::size_t i = 0; i < vocab->size(); ++i) {
            if (!word_vectors->has(vocab->token(i))) continue;
            const auto& v = word_vectors->vec(vocab->token(i));
            std::copy(v.begin(), v.end(), embed.row(i).begin());
        }
    }
    return params;
}

std::vector<double> lstm_step(const LMParams& params, int layer, std::span<const double> input,
                              LstmState& state) {
    forward_step(layer_view(params, layer), input, state, nullptr);
    return state.hidden;
}

std::vector<std::vector<double>> lm_forward(const LMParams& params,
                                            const std::vector<std::size_t>& token_ids) {
    const Tensor& embed = params.store.get("embed");
    const LayerView l1 = layer_view(params, 1);
    const LayerView l2 = layer_view(params, 2);
    LstmState s1 = LstmState::zero(params.dims.hidden1);
    LstmState s2 = LstmState::zero(params.dims.hidden2);
    std::vector<std::vector<double>> out;
    out.reserve(token_ids.size());
    for (std::size_t id : token_ids) {
        if (id >= params.dims.vocab) {
            throw NotFound("token id " + std::to_string(id) + " outside vocabulary");
        }
        forward_step(l1, embed.row(id), s1, nullptr);
        forward_step(l2, s1.hidden, s2, nullptr);
        out.push_back(s2.hidden);
    }
    return out;
}

double lm_loss(const LMParams& params, const std::vector<std::vector<std::size_t>>& sentences,
               ParamStore* grads) {
    if (sentences.empty()) throw InvalidArgument("lm_loss: empty batch");
    const Tensor& embed = params.store.get("embed");
    const Tensor& head = params.store.get("head");
    const LayerView l1 = layer_view(params, 1);
    const LayerView l2 = layer_view(params, 2);

    std::size_t total_tokens = 0;
    for (const auto& s : sentences) total_tokens += s.size() + 1;  // targets include EOS

    LayerGrads g1{}, g2{};
    Tensor* d_embed = nullptr;
    Tensor* d_head = nullptr;
    if (grads != nullptr) {
        if (!grads->has("embed")) {
            for (const auto& name : params.store.names()) {
                grads->add(name, Tensor::zeros(params.store.get(name).shape));
            }
        }
        for (const auto& name : grads->names()) grads->get(name).fill(0.0);
        d_embed = &grads->get("embed");
        d_head = &grads->get("head");
        g1 = {&grads->get("l1.Wx"), &grads->get("l1.Wh"), &grads->get("l1.b")};
        g2 = {&grads->get("l2.Wx"), &grads->get("l2.Wh"), &grads->get("l2.b")};
    }

    const double scale = 1.0 / static_cast<double>(total_tokens);
    double loss = 0.0;
    for (const auto& sentence : sentences) {
        std::vector<std::size_t> inputs{Vocabulary::kBos};
        inputs.insert(inputs.end(), sentence.begin(), sentence.end());
        std::vector<std::size_t> targets(sentence);
        targets.push_back(Vocabulary::kEos);

        const std::size_t steps = inputs.size();
        std::vector<StepCache> cache1(steps), cache2(steps);
        LstmState s1 = LstmState::zero(params.dims.hidden1);
        LstmState s2 = LstmState::zero(params.dims.hidden2);
        std::vector<std::vector<double>> dh2_steps(steps);
        for (std::size_t t = 0; t < steps; ++t) {
            if (inputs[t] >= params.dims.vocab || targets[t] >= params.dims.vocab) {
                throw NotFound("token id outside vocabulary in lm_loss");
            }
            forward_step(l1, embed.row(inputs[t]), s1, grads ? &cache1[t] : nullptr);
            forward_step(l2, s1.hidden, s2, grads ? &cache2[t] : nullptr);
            std::vector<double> logits = matvec_transposed(head, s2.hidden);
            std::vector<double> p = softmax(logits);
            loss += -std::log(std::max(p[targets[t]], 1e-300)) * scale;
            if (grads != nullptr) {
                // d loss / d logits = (p - onehot) * scale
                p[targets[t]] -= 1.0;
                for (double& v : p) v *= scale;
                add_scaled_outer(*d_head, 1.0, s2.hidden, p);
                dh2_steps[t] = matvec(head, p);
            }
        }
        if (grads == nullptr) continue;

        std::vector<double> dh2(params.dims.hidden2, 0.0), dc2(params.dims.hidden2, 0.0);
        std::vector<double> dh1(params.dims.hidden1, 0.0), dc1(params.dims.hidden1, 0.0);
        for (std::size_t t = steps; t-- > 0;) {
            for (std::size_t i = 0; i < dh2.size(); ++i) dh2[i] += dh2_steps[t][i];
            std::vector<double> dh1_from_l2(params.dims.hidden1, 0.0);
            backward_step(l2, cache2[t], dh2, dc2, dh1_from_l2, g2);
            for (std::size_t i = 0; i < dh1.size(); ++i) dh1[i] += dh1_from_l2[i];
            std::vector<double> dx(params.dims.embedding, 0.0);
            backward_step(l1, cache1[t], dh1, dc1, dx, g1);
            axpy(1.0, dx, d_embed->row(inputs[t]));
        }
    }
    return loss;
}

void pretrain_lm(LMParams& params, const std::vector<std::vector<std::string>>& corpus,
                 const Vocabulary& vocab, const LMTrainConfig& config,
                 const EpochCallback& on_epoch) {
    if (corpus.empty()) throw InvalidArgument("pretrain_lm: empty corpus");
    if (config.batch_size == 0) throw InvalidArgument("pretrain_lm: batch_size must be >= 1");
    std::vector<std::vector<std::size_t>> sentences;
    sentences.reserve(corpus.size());
    for (const auto& tokens : corpus) sentences.push_back(tokens_to_ids(tokens, vocab));

    Rng rng(config.seed);
    AdamState adam;
    adam.hyper.learning_rate = config.learning_rate;
    ParamStore grads;
    std::vector<std::size_t> order(sentences.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            std::vector<std::vector<std::size_t>> batch;
            batch.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) batch.push_back(sentences[order[i]]);
            epoch_loss += lm_loss(params, batch, &grads);
            ++batches;
            clip_global_norm(grads, config.clip_norm);
            adam_step(params.store, grads, adam);
        }
        if (on_epoch) on_epoch(epoch, epoch_loss / static_cast<double>(batches));
    }
    params.store.freeze_all();
}

NllBreakdown sequence_nll(const LMParams& params, const std::vector<std::size_t>& sentence_ids) {
    const Tensor& head = params.store.get("head");
    std::vector<std::size_t> inputs{Vocabulary::kBos};
    inputs.insert(inputs.end(), sentence_ids.begin(), sentence_ids.end());
    std::vector<std::size_t> targets(sentence_ids);
    targets.push_back(Vocabulary::kEos);

    NllBreakdown out;
    const auto hidden = lm_forward(params, inputs);
    for (std::size_t t = 0; t < hidden.size(); ++t) {
        const std::vector<double> p = softmax(matvec_transposed(head, hidden[t]));
        const double nll = -std::log(std::max(p[targets[t]], 1e-300));
        out.per_token.push_back(nll);
        out.total += nll;
    }
    out.tokens = targets.size();
    return out;
}

double perplexity_from_nll(double total_nll, std::size_t token_count) {
    if (token_count == 0) throw InvalidArgument("perplexity: no tokens");
    return std::exp(total_nll / static_cast<double>(token_count));
}

double perplexity(const LMParams& params, const std::vector<std::vector<std::string>>& corpus,
                  const Vocabulary& vocab) {
    if (corpus.empty()) throw InvalidArgument("perplexity: empty corpus");
    double total = 0.0;
    std::size_t tokens = 0;
    for (const auto& sentence : corpus) {
        NllBreakdown nll = sequence_nll(params, tokens_to_ids(sentence, vocab));
        total += nll.total;
        tokens += nll.tokens;
    }
    return perplexity_from_nll(total, tokens);
}

std::vector<std::size_t> tokens_to_ids(const std::vector<std::string>& tokens,
                                       const Vocabulary& vocab) {
    std::vector<std::size_t> ids;
    ids.reserve(tokens.size());
    for (const auto& tok : tokens) ids.push_back(vocab.index_of(tok));
    return ids;
}

}  // namespace kga
