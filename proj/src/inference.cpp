#include "kga/inference.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "kga/errors.hpp"

namespace kga {

std::string closest_seen_word(const std::string& unseen_word,
                              const EmbeddingMatrix& word_embeddings,
                              const std::vector<std::string>& seen_words) {
    if (seen_words.empty()) {
        throw InvalidArgument("closest_seen_word: empty seen vocabulary");
    }
    const std::vector<double>& query = word_embeddings.vec(unseen_word);
    std::string best;
    double best_cosine = 0.0;
    bool found = false;
    for (const auto& word : seen_words) {
        if (word == unseen_word) continue;
        const double cos = cosine_similarity(query, word_embeddings.vec(word));
        if (!found || cos > best_cosine || (cos == best_cosine && word < best)) {
            best = word;
            best_cosine = cos;
            found = true;
        }
    }
    if (!found) throw InvalidArgument("closest_seen_word: no candidate distinct from query");
    return best;
}

LabelColumns LabelColumns::from_world(const World& world) {
    LabelColumns out;
    for (std::size_t i = 0; i < world.word_label_inventory.size(); ++i) {
        out.columns.emplace(world.word_label_inventory[i], i);
    }
    return out;
}

std::optional<std::size_t> LabelColumns::column(const std::string& word) const {
    auto it = columns.find(word);
    if (it == columns.end()) return std::nullopt;
    return it->second;
}

ScopedOverride::ScopedOverride(ScopedOverride&& other) noexcept { *this = std::move(other); }

ScopedOverride& ScopedOverride::operator=(ScopedOverride&& other) noexcept {
    if (this != &other) {
        release();
        params_ = other.params_;
        registry_ = other.registry_;
        rows_ = std::move(other.rows_);
        cells_ = std::move(other.cells_);
        locks_ = std::move(other.locks_);
        other.params_ = nullptr;
        other.registry_ = nullptr;
    }
    return *this;
}

ScopedOverride::~ScopedOverride() { release(); }

void ScopedOverride::release() {
    if (params_ == nullptr) return;
    // restore in reverse application order so stacked transfers unwind exactly
    for (auto it = cells_.rbegin(); it != cells_.rend(); ++it) {
        params_->store.get(it->tensor).at(it->row, it->col) = it->value;
    }
    for (auto it = rows_.rbegin(); it != rows_.rend(); ++it) {
        auto row = params_->store.get(it->tensor).row(it->row);
        std::copy(it->values.begin(), it->values.end(), row.begin());
    }
    if (registry_ != nullptr) {
        for (const auto& lock : locks_) registry_->erase(lock);
    }
    params_ = nullptr;
    registry_ = nullptr;
    rows_.clear();
    cells_.clear();
    locks_.clear();
}

ScopedOverride apply_transfer(CGMParams& params, const TransferRule& rule,
                              const Vocabulary& vocab, const LabelColumns& columns,
                              const TransferOptions& options, OverrideRegistry* registry) {
    const std::size_t unseen = vocab.index_of(rule.unseen_word);
    const std::size_t closest = vocab.index_of(rule.closest_word);
    if (unseen == closest) throw InvalidArgument("apply_transfer: rule maps a word to itself");

    ScopedOverride override_;
    override_.params_ = &params;
    override_.registry_ = registry;
    auto lock_row = [&](const std::string& tensor, std::size_t row) {
        if (registry != nullptr) {
            if (!registry->emplace(tensor, row).second) {
                for (const auto& taken : override_.locks_) registry->erase(taken);
                override_.params_ = nullptr;  // nothing applied yet
                throw ContractViolation("apply_transfer: overlapping active override on " +
                                        tensor + " row " + std::to_string(row));
            }
            override_.locks_.emplace_back(tensor, row);
        }
    };
    lock_row("W_c", unseen);
    lock_row("W_I", unseen);
    if (options.copy_textual_row) lock_row("W_h2", unseen);

    auto save_row = [&](const std::string& tensor, std::size_t row) {
        const auto values = params.store.get(tensor).row(row);
        override_.rows_.push_back({tensor, row, {values.begin(), values.end()}});
    };
    auto save_cell = [&](const std::string& tensor, std::size_t row, std::size_t col) {
        override_.cells_.push_back({tensor, row, col, params.store.get(tensor).at(row, col)});
    };
    auto copy_row = [&](const std::string& tensor) {
        Tensor& t = params.store.get(tensor);
        save_row(tensor, unseen);
        const auto src = t.row(closest);
        std::copy(src.begin(), src.end(), t.row(unseen).begin());
    };

    copy_row("W_c");
    copy_row("W_I");
    if (options.copy_textual_row) copy_row("W_h2");

    Tensor& w_i = params.store.get("W_I");
    const auto unseen_col = columns.column(rule.unseen_word);
    const auto closest_col = columns.column(rule.closest_word);
    if (unseen_col && closest_col) {
        if (options.remap_self_feature) {
            // the unseen row already holds the closest row's values, so its
            // old self-feature cell is the closest word's cross weight
            w_i.at(unseen, *unseen_col) = w_i.at(closest, *closest_col);
        }
        w_i.at(unseen, *closest_col) = 0.0;
        save_cell("W_I", closest, *unseen_col);
        w_i.at(closest, *unseen_col) = 0.0;
    } else {
        std::cerr << "[kga] transfer " << rule.unseen_word << "<-" << rule.closest_word
                  << ": word without feature column, cross-zeroing skipped\n";
    }
    return override_;
}

namespace {

struct Hypothesis {
    std::vector<std::size_t> tokens;  // emitted ids, EOS excluded
    double log_prob = 0.0;
    bool done = false;
    LstmState state1, state2;
    StepTrace trace;
};

struct StepComputation {
    std::vector<double> h2;
    LstmState next1, next2;
    EsaResult esa;
    std::vector<double> distribution;
};

}  // namespace

GenerationResult generate(const LMParams& lm, CGMParams& cgm, const CGMConfig& cgm_config,
                          const ImageRecord& image, const std::vector<TransferRule>& rules,
                          const GenerateConfig& config, const Vocabulary& vocab,
                          const EmbeddingMatrix& entity_embeddings, const LabelColumns& columns) {
    if (config.beam_width == 0) throw InvalidArgument("generate: beam width must be >= 1");
    if (image.features.size() != cgm.dims.image_dim) {
        throw InvalidArgument("generate: image feature dim mismatch");
    }
    std::vector<std::vector<double>> entity_vectors;
    entity_vectors.reserve(image.gold_entity_labels.size());
    for (const auto& id : image.gold_entity_labels) {
        entity_vectors.push_back(entity_embeddings.vec(id));
    }

    // rules armed for this image: unseen entity among its annotations
    std::vector<const TransferRule*> armed;
    if (config.ci_enabled) {
        for (const auto& rule : rules) {
            if (std::find(image.gold_entity_labels.begin(), image.gold_entity_labels.end(),
                          rule.unseen_entity) != image.gold_entity_labels.end()) {
                armed.push_back(&rule);
            }
        }
    }
    std::vector<bool> fired(armed.size(), false);
    std::vector<ScopedOverride> overrides;
    OverrideRegistry registry;
    std::vector<TransferRule> fired_rules;

    Hypothesis start;
    start.state1 = LstmState::zero(lm.dims.hidden1);
    start.state2 = LstmState::zero(lm.dims.hidden2);
    if (cgm_config.enable_esa) start.trace.entity_labels = image.gold_entity_labels;
    std::vector<Hypothesis> beam{std::move(start)};

    // best EOS-terminated hypothesis seen anywhere, beam slot or not
    bool have_finished = false;
    Hypothesis finished;

    const Tensor& embed = lm.store.get("embed");
    const std::span<const double> image_features(image.features);

    auto compute_step = [&](const Hypothesis& hyp) {
        StepComputation comp;
        comp.next1 = hyp.state1;
        comp.next2 = hyp.state2;
        const std::size_t input = hyp.tokens.empty() ? Vocabulary::kBos : hyp.tokens.back();
        const std::vector<double> h1 = lstm_step(lm, 1, embed.row(input), comp.next1);
        comp.h2 = lstm_step(lm, 2, h1, comp.next2);
        if (cgm_config.enable_esa) {
            comp.esa = esa_attend(comp.h2, entity_vectors, cgm.store.get("W_he"));
        } else {
            comp.esa.context.assign(cgm.dims.entity_dim, 0.0);
        }
        comp.distribution = softmax(
            tsv_fuse(cgm, comp.h2, comp.esa.context, image_features, cgm_config.enable_esa));
        return comp;
    };
    auto argmax = [](const std::vector<double>& v) {
        return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
    };

    for (std::size_t step = 0; step < config.max_len; ++step) {
        bool any_live = false;
        std::vector<StepComputation> computations(beam.size());
        for (std::size_t i = 0; i < beam.size(); ++i) {
            if (beam[i].done) continue;
            any_live = true;
            computations[i] = compute_step(beam[i]);
        }
        if (!any_live) break;

        // constrained-inference trigger: the top prediction of a live
        // hypothesis names some armed rule's closest word
        bool transferred = false;
        for (std::size_t i = 0; i < beam.size(); ++i) {
            if (beam[i].done) continue;
            const std::size_t top = argmax(computations[i].distribution);
            for (std::size_t r = 0; r < armed.size(); ++r) {
                if (fired[r]) continue;
                if (vocab.token(top) != armed[r]->closest_word) continue;
                overrides.push_back(apply_transfer(cgm, *armed[r], vocab, columns,
                                                   config.transfer, &registry));
                fired[r] = true;
                fired_rules.push_back(*armed[r]);
                transferred = true;
            }
        }
        if (transferred && config.recompute_trigger_step) {
            for (std::size_t i = 0; i < beam.size(); ++i) {
                if (beam[i].done) continue;
                computations[i].distribution =
                    softmax(tsv_fuse(cgm, computations[i].h2, computations[i].esa.context,
                                     image_features, cgm_config.enable_esa));
            }
        }

        // candidate pool: finished hypotheses carry over as-is, live ones
        // offer every extension; EOS extensions are additionally recorded in
        // the side pool so a short optimum survives slot pruning
        struct Candidate {
            double log_prob;
            std::size_t hyp;
            std::size_t token;  // ignored when carry is set
            bool carry;
        };
        std::vector<Candidate> pool;
        for (std::size_t i = 0; i < beam.size(); ++i) {
            if (beam[i].done) {
                pool.push_back({beam[i].log_prob, i, 0, true});
                continue;
            }
            const auto& dist = computations[i].distribution;
            for (std::size_t v = 0; v < dist.size(); ++v) {
                pool.push_back({beam[i].log_prob + std::log(std::max(dist[v], 1e-300)), i, v,
                                false});
            }
        }
        std::stable_sort(pool.begin(), pool.end(), [](const Candidate& a, const Candidate& b) {
            return a.log_prob > b.log_prob;
        });

        auto build_extension = [&](const Candidate& cand) {
            Hypothesis hyp = beam[cand.hyp];
            const auto& comp = computations[cand.hyp];
            hyp.log_prob = cand.log_prob;
            hyp.state1 = comp.next1;
            hyp.state2 = comp.next2;
            StepRecord rec;
            rec.attention = comp.esa.weights;
            rec.context = comp.esa.context;
            rec.distribution = comp.distribution;
            hyp.trace.steps.push_back(std::move(rec));
            if (cand.token == Vocabulary::kEos) {
                hyp.done = true;
            } else {
                hyp.tokens.push_back(cand.token);
                hyp.trace.emitted_tokens.push_back(vocab.token(cand.token));
            }
            return hyp;
        };
        for (const auto& cand : pool) {
            if (cand.carry || cand.token != Vocabulary::kEos) continue;
            if (!have_finished || cand.log_prob > finished.log_prob) {
                finished = build_extension(cand);
                have_finished = true;
            }
        }
        if (pool.size() > config.beam_width) pool.resize(config.beam_width);

        std::vector<Hypothesis> next_beam;
        next_beam.reserve(pool.size());
        for (const auto& cand : pool) {
            if (cand.carry) {
                next_beam.push_back(beam[cand.hyp]);
                continue;
            }
            next_beam.push_back(build_extension(cand));
        }
        beam = std::move(next_beam);
    }

    // release transfers before returning: weights go back to their initial
    // state for the next sample
    for (auto it = overrides.rbegin(); it != overrides.rend(); ++it) it->release();

    std::size_t best = 0;
    for (std::size_t i = 1; i < beam.size(); ++i) {
        if (beam[i].log_prob > beam[best].log_prob) best = i;
    }
    Hypothesis* winner = &beam[best];
    if (have_finished && finished.log_prob >= winner->log_prob) winner = &finished;

    GenerationResult result;
    result.log_prob = winner->log_prob;
    result.truncated = !winner->done;
    result.trace = std::move(winner->trace);
    result.trace.truncated = result.truncated;
    result.fired_rules = std::move(fired_rules);
    for (std::size_t id : winner->tokens) result.tokens.push_back(vocab.token(id));
    return result;
}

}  // namespace kga
