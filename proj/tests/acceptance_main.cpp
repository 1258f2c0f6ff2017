// Acceptance suite: runs every gate criterion at its pinned tolerance and
// prints one [PASS]/[FAIL] line per criterion. Exits non-zero if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "kga/cgm.hpp"
#include "kga/corpus.hpp"
#include "kga/eval.hpp"
#include "kga/grad_check.hpp"
#include "kga/inference.hpp"
#include "kga/kb_embed.hpp"
#include "kga/labelers.hpp"
#include "kga/lm.hpp"
#include "kga/pipeline.hpp"
#include "kga/rng.hpp"
#include "test_support.hpp"

using namespace kga;

namespace {

int failures = 0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void report(int criterion, const char* name, bool ok, const std::string& detail) {
    std::printf("[%s] criterion %d (%s): %s\n", ok ? "PASS" : "FAIL", criterion, name,
                detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), pattern, a, b, c);
    return buf;
}

std::vector<double> rand_vec(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

// ---- criterion 1: gradient suite ------------------------------------------

void criterion_1() {
    const auto start = Clock::now();
    double worst = 0.0;
    std::string worst_name = "none";
    auto track = [&](const char* name, const GradCheckReport& rep) {
        if (rep.max_rel_error() >= worst) {
            worst = rep.max_rel_error();
            worst_name = name;
        }
    };

    {  // unrolled language-model loss, H <= 8, short sequences
        LMDims dims{7, 3, 4, 4};
        const LMParams lm = init_lm(dims, 11);
        const std::vector<std::vector<std::size_t>> batch{{2, 4, 3, 6, 5}, {5, 6}};
        ParamStore grads;
        lm_loss(lm, batch, &grads);
        auto loss = [&](const ParamStore& p) {
            LMParams probe;
            probe.dims = dims;
            probe.store = p;
            return lm_loss(probe, batch, nullptr);
        };
        track("lm", grad_check(loss, lm.store, grads, 1e-5, 1e-4));
    }
    {  // caption-model loss: all four matrices, H=E=I=4, vs=8
        DatasetBundle bundle;
        bundle.unpaired_text = {{"red", "kite"}, {"blue", "stone"}, {"kite", "flies"},
                                {"stone", "sinks"}};
        Vocabulary vocab = Vocabulary::build(bundle);
        Rng rng(3);
        EmbeddingMatrix entities;
        entities.insert("Kite", rand_vec(rng, 4));
        entities.insert("Stone", rand_vec(rng, 4));
        LMParams lm = init_lm({vocab.size(), 3, 4, 4}, 4);
        lm.store.freeze_all();
        CGMParams cgm = init_cgm({vocab.size(), 4, 4, 4}, 5);
        std::vector<PairedExample> examples(2);
        examples[0].image.id = "a";
        examples[0].image.features = rand_vec(rng, 4, 0.0, 1.0);
        examples[0].image.gold_entity_labels = {"Kite", "Stone"};
        examples[0].caption = {"a", {"red", "kite", "flies"}};
        examples[1].image.id = "b";
        examples[1].image.features = rand_vec(rng, 4, 0.0, 1.0);
        examples[1].image.gold_entity_labels = {"Stone"};
        examples[1].caption = {"b", {"blue", "stone"}};
        std::vector<const PairedExample*> batch{&examples[0], &examples[1]};
        ParamStore grads;
        cgm_batch_loss(lm, cgm, true, batch, vocab, entities, &grads);
        auto loss = [&](const ParamStore& p) {
            CGMParams probe;
            probe.dims = cgm.dims;
            probe.store = p;
            return cgm_batch_loss(lm, probe, true, batch, vocab, entities, nullptr);
        };
        const auto rep = grad_check(loss, cgm.store, grads, 1e-5, 1e-4);
        track("cgm", rep);
        if (rep.entries.size() != 4) {
            report(1, "gradient suite", false, "caption model must check all four matrices");
            return;
        }
    }
    {  // one skip-gram term with negatives
        Rng rng(6);
        ParamStore params;
        params.add("center", Tensor::vector(rand_vec(rng, 6)));
        params.add("context", Tensor::vector(rand_vec(rng, 6)));
        params.add("neg0", Tensor::vector(rand_vec(rng, 6)));
        params.add("neg1", Tensor::vector(rand_vec(rng, 6)));
        const SkipgramTermGrads g =
            skipgram_term(params.get("center").values, params.get("context").values,
                          {params.get("neg0").values, params.get("neg1").values});
        ParamStore grads;
        grads.add("center", Tensor::vector(g.d_center));
        grads.add("context", Tensor::vector(g.d_context));
        grads.add("neg0", Tensor::vector(g.d_negatives[0]));
        grads.add("neg1", Tensor::vector(g.d_negatives[1]));
        auto loss = [&](const ParamStore& p) {
            return skipgram_term(p.get("center").values, p.get("context").values,
                                 {p.get("neg0").values, p.get("neg1").values})
                .loss;
        };
        track("skipgram", grad_check(loss, params, grads, 1e-5, 1e-4));
    }
    {  // multi-label classifier
        Rng rng(8);
        MultiLabelClassifier clf = init_multilabel({"cat", "dog", "sun"}, 4, 8);
        std::vector<std::vector<double>> features;
        std::vector<std::set<std::string>> labelsets;
        for (int i = 0; i < 5; ++i) {
            features.push_back(rand_vec(rng, 4));
            std::set<std::string> ls;
            if (rng.uniform() < 0.6) ls.insert("cat");
            if (rng.uniform() < 0.5) ls.insert("dog");
            if (rng.uniform() < 0.4) ls.insert("sun");
            labelsets.push_back(ls);
        }
        ParamStore grads;
        multilabel_loss(clf, features, labelsets, &grads);
        auto loss = [&](const ParamStore& p) {
            MultiLabelClassifier probe = clf;
            probe.store = p;
            return multilabel_loss(probe, features, labelsets, nullptr);
        };
        track("multilabel", grad_check(loss, clf.store, grads, 1e-5, 1e-4));
    }

    const double elapsed = seconds_since(start);
    const bool ok = worst <= 1e-4 && elapsed < 60.0;
    report(1, "gradient suite", ok,
           fmt("max rel err %.3e (worst: ", worst) + worst_name +
               fmt("), runtime %.1f s (< 60 s)", elapsed));
}

// ---- criterion 2: attention contract ---------------------------------------

// solve min ||A w - c|| by normal equations; A is dim x L with L <= dim
std::vector<double> solve_simplex_weights(const std::vector<std::vector<double>>& entities,
                                          const std::vector<double>& context) {
    const std::size_t L = entities.size();
    std::vector<std::vector<double>> gram(L, std::vector<double>(L + 1, 0.0));
    for (std::size_t i = 0; i < L; ++i) {
        for (std::size_t j = 0; j < L; ++j) {
            gram[i][j] = dot(entities[i], entities[j]);
        }
        gram[i][L] = dot(entities[i], context);
    }
    for (std::size_t col = 0; col < L; ++col) {  // gaussian elimination, partial pivot
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < L; ++r) {
            if (std::abs(gram[r][col]) > std::abs(gram[pivot][col])) pivot = r;
        }
        std::swap(gram[col], gram[pivot]);
        for (std::size_t r = 0; r < L; ++r) {
            if (r == col || gram[col][col] == 0.0) continue;
            const double factor = gram[r][col] / gram[col][col];
            for (std::size_t k = col; k <= L; ++k) gram[r][k] -= factor * gram[col][k];
        }
    }
    std::vector<double> w(L, 0.0);
    for (std::size_t i = 0; i < L; ++i) {
        w[i] = gram[i][i] != 0.0 ? gram[i][L] / gram[i][i] : 0.0;
    }
    return w;
}

void criterion_2() {
    Rng rng(1234);
    double worst_sum = 0.0, worst_neg = 0.0, worst_resolve = 0.0;
    bool singleton_exact = true;
    for (int call = 0; call < 1000; ++call) {
        const std::size_t hidden = 2 + rng.uniform_index(7);
        const std::size_t entity_dim = 6 + rng.uniform_index(3);
        const std::size_t L = 1 + rng.uniform_index(6);  // L <= entity_dim
        Tensor w_he({hidden, entity_dim}, rand_vec(rng, hidden * entity_dim, -2.0, 2.0));
        const std::vector<double> h = rand_vec(rng, hidden, -2.0, 2.0);
        std::vector<std::vector<double>> entities;
        for (std::size_t i = 0; i < L; ++i) entities.push_back(rand_vec(rng, entity_dim));

        const EsaResult r = esa_attend(h, entities, w_he);
        if (L == 1 && !(r.weights.size() == 1 && r.weights[0] == 1.0)) singleton_exact = false;
        double sum = 0.0;
        for (double b : r.weights) {
            sum += b;
            worst_neg = std::min(worst_neg, b);
        }
        worst_sum = std::max(worst_sum, std::abs(sum - 1.0));

        // convex-hull check: re-solve the combination and confirm the
        // recovered weights are the simplex point the context claims
        const std::vector<double> w = solve_simplex_weights(entities, r.context);
        double w_sum = 0.0;
        for (std::size_t i = 0; i < L; ++i) {
            worst_resolve = std::max(worst_resolve, std::abs(w[i] - r.weights[i]));
            worst_neg = std::min(worst_neg, w[i]);
            w_sum += w[i];
        }
        worst_resolve = std::max(worst_resolve, std::abs(w_sum - 1.0));
    }
    const bool ok = worst_sum <= 1e-9 && worst_neg >= -1e-9 && worst_resolve <= 1e-9 &&
                    singleton_exact;
    report(2, "attention contract", ok,
           fmt("1000 calls: |sum-1| <= %.2e, min weight %.2e, re-solve gap %.2e", worst_sum,
               worst_neg, worst_resolve) +
               (singleton_exact ? ", L=1 exact" : ", L=1 VIOLATED"));
}

// ---- criterion 3: beam correctness -----------------------------------------

void criterion_3() {
    std::size_t greedy_ok = 0, greedy_total = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        kga_test::DecodeFixture f = kga_test::make_decode_fixture(seed);
        CGMConfig cgm_cfg;
        GenerateConfig gen;
        gen.beam_width = 1;
        gen.max_len = 6;
        gen.ci_enabled = false;
        for (const auto& image : f.images) {
            ++greedy_total;
            const GenerationResult r = generate(f.lm, f.cgm, cgm_cfg, image, {}, gen, f.vocab,
                                                f.entities, f.columns);
            if (r.tokens ==
                kga_test::greedy_decode(f.lm, f.cgm, f.vocab, f.entities, image, 6)) {
                ++greedy_ok;
            }
        }
    }

    std::size_t enum_ok = 0, enum_total = 0;
    double worst_gap = 0.0;
    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
        kga_test::DecodeFixture f = kga_test::make_decode_fixture(seed);
        CGMConfig cgm_cfg;
        GenerateConfig gen;
        gen.beam_width = 3;
        gen.max_len = 4;
        gen.ci_enabled = false;
        for (const auto& image : f.images) {
            ++enum_total;
            const GenerationResult r = generate(f.lm, f.cgm, cgm_cfg, image, {}, gen, f.vocab,
                                                f.entities, f.columns);
            const auto best = kga_test::enumerate_best(f.lm, f.cgm, image, f.entities, 4);
            const double gap = std::abs(r.log_prob - best.log_prob);
            worst_gap = std::max(worst_gap, gap);
            if (gap <= 1e-9) ++enum_ok;
        }
    }
    const bool ok = greedy_ok == greedy_total && enum_ok == enum_total;
    report(3, "beam correctness", ok,
           fmt("greedy match %.0f/100, enumeration match %.0f/50, worst log-prob gap %.2e",
               static_cast<double>(greedy_ok), static_cast<double>(enum_ok), worst_gap));
}

// ---- criterion 4: transfer scoping -----------------------------------------

void criterion_4() {
    Rng rng(777);
    std::size_t cycles_ok = 0;
    const std::size_t total = 200;
    for (std::size_t cycle = 0; cycle < total; ++cycle) {
        // random vocabulary with two unseen words and feature columns
        const std::size_t vs = 8 + rng.uniform_index(8);
        const std::size_t image_dim = 4 + rng.uniform_index(6);
        CGMDims dims{vs, 3 + rng.uniform_index(4), 3 + rng.uniform_index(4), image_dim};
        CGMParams cgm = init_cgm(dims, rng.next_u64());

        DatasetBundle bundle;
        std::vector<std::string> words;
        for (std::size_t i = 0; i < vs - 2; ++i) words.push_back("w" + std::to_string(i));
        bundle.unpaired_text.push_back(words);
        Vocabulary vocab = Vocabulary::build(bundle);
        LabelColumns columns;
        for (std::size_t i = 0; i < words.size() && i < image_dim; ++i) {
            columns.columns.emplace(words[i], i);
        }
        const std::size_t n_cols = std::min(words.size(), image_dim);
        if (n_cols < 4) continue;

        // one or two non-overlapping rules among column-bearing words
        std::vector<TransferRule> rules;
        rules.push_back({words[0], words[1], "E0"});
        if (rng.uniform() < 0.5) rules.push_back({words[2], words[3], "E1"});

        std::map<std::string, std::vector<double>> snapshot;
        for (const auto& name : cgm.store.names()) snapshot[name] = cgm.store.get(name).values;

        bool cycle_good = true;
        {
            OverrideRegistry registry;
            std::vector<ScopedOverride> overrides;
            TransferOptions literal;  // the exact published contract
            literal.copy_textual_row = false;
            literal.remap_self_feature = false;
            for (const auto& rule : rules) {
                overrides.push_back(
                    apply_transfer(cgm, rule, vocab, columns, literal, &registry));
            }
            const Tensor& wc = cgm.store.get("W_c");
            const Tensor& wi = cgm.store.get("W_I");
            for (const auto& rule : rules) {
                const std::size_t u = vocab.index_of(rule.unseen_word);
                const std::size_t cl = vocab.index_of(rule.closest_word);
                const std::size_t col_u = *columns.column(rule.unseen_word);
                const std::size_t col_cl = *columns.column(rule.closest_word);
                for (std::size_t j = 0; j < wc.cols(); ++j) {
                    if (wc.at(u, j) != wc.at(cl, j)) cycle_good = false;
                }
                for (std::size_t j = 0; j < wi.cols(); ++j) {
                    if (j == col_cl || j == col_u) continue;
                    if (wi.at(u, j) != wi.at(cl, j)) cycle_good = false;
                }
                if (wi.at(u, col_cl) != 0.0) cycle_good = false;
                if (wi.at(cl, col_u) != 0.0) cycle_good = false;
            }
            for (auto it = overrides.rbegin(); it != overrides.rend(); ++it) it->release();
        }
        for (const auto& name : cgm.store.names()) {
            if (cgm.store.get(name).values != snapshot[name]) cycle_good = false;
        }

        {  // default mode: textual row copy + self-feature remap, same scoping
            OverrideRegistry registry;
            std::vector<ScopedOverride> overrides;
            for (const auto& rule : rules) {
                overrides.push_back(apply_transfer(cgm, rule, vocab, columns, {}, &registry));
            }
            for (auto it = overrides.rbegin(); it != overrides.rend(); ++it) it->release();
        }
        for (const auto& name : cgm.store.names()) {
            if (cgm.store.get(name).values != snapshot[name]) cycle_good = false;
        }
        if (cycle_good) ++cycles_ok;
    }
    report(4, "transfer scoping", cycles_ok == total,
           fmt("%.0f/200 randomized apply/release cycles bitwise clean, row equalities and "
               "zeroed cross entries exact",
               static_cast<double>(cycles_ok)));
}

// ---- criteria 5-10 share the default desk bundle ----------------------------

struct DeskPipeline {
    World world;
    DatasetBundle bundle;
    PipelineArtifacts artifacts;
    LMParams lm;
    std::map<std::string, std::vector<double>> lm_snapshot;
};

DeskPipeline build_desk_pipeline() {
    DeskPipeline p;
    p.world = build_world(7, WorldConfig{});
    p.bundle = sample_dataset(p.world, 7, SampleSizes{}, {"kettle", "bench"});
    PipelineConfig pc;
    p.artifacts = build_artifacts(p.world, p.bundle, pc);
    p.lm = pretrain_language_model(p.bundle, p.artifacts, pc);
    for (const auto& name : p.lm.store.names()) {
        p.lm_snapshot[name] = p.lm.store.get(name).values;
    }
    return p;
}

void criterion_5(DeskPipeline& p) {
    const auto start = Clock::now();
    AblationConfig ac;
    ac.cgm_train.epochs = 6;
    ac.beams = {1};
    const auto results = ablation_run(p.bundle, p.lm, p.artifacts.vocab,
                                      p.artifacts.entity_embeddings, p.artifacts.rules,
                                      p.artifacts.columns, ac, {1, 2, 3});
    std::map<std::uint64_t, std::map<AblationMode, const AblationResult*>> by_seed;
    for (const auto& r : results) by_seed[r.seed][r.mode] = &r;

    std::size_t seeds_ok = 0;
    std::string detail;
    for (const auto& [seed, modes] : by_seed) {
        const double none = modes.at(AblationMode::None)->mean_f1;
        const double only_esa = modes.at(AblationMode::OnlyESA)->mean_f1;
        const double only_ci = modes.at(AblationMode::OnlyCI)->mean_f1;
        const double esa_ci = modes.at(AblationMode::EsaCi)->mean_f1;
        const double nll_esa_ci = modes.at(AblationMode::EsaCi)->test_nll;
        const double nll_only_ci = modes.at(AblationMode::OnlyCI)->test_nll;
        const bool ok = none <= 0.02 && only_esa <= 0.02 && only_ci >= 0.30 &&
                        esa_ci >= only_ci && nll_esa_ci <= nll_only_ci;
        if (ok) ++seeds_ok;
        detail += fmt("[seed F1: none %.2f, esa %.2f, ", none, only_esa) +
                  fmt("ci %.2f, esa+ci %.2f] ", only_ci, esa_ci);
    }
    const double elapsed = seconds_since(start);
    const bool ok = seeds_ok >= 2 && elapsed < 600.0;
    report(5, "ablation ordering", ok,
           detail + fmt("%.0f/3 seeds ordered, %.0f s (< 600 s)",
                        static_cast<double>(seeds_ok), elapsed));
}

void criterion_6(const DeskPipeline& p) {
    bool ok = true;
    for (const auto& name : p.lm.store.names()) {
        if (p.lm.store.get(name).values != p.lm_snapshot.at(name)) ok = false;
        if (!p.lm.store.is_frozen(name)) ok = false;
    }
    report(6, "freeze contract", ok,
           ok ? "every language-model tensor bitwise equals its pretrained value"
              : "language-model tensors were mutated by caption training");
}

void criterion_7(const DeskPipeline& p) {
    // held-out slice: last 10% of the unpaired corpus
    const std::size_t split = p.bundle.unpaired_text.size() * 9 / 10;
    std::vector<std::vector<std::string>> train(p.bundle.unpaired_text.begin(),
                                                p.bundle.unpaired_text.begin() + split);
    std::vector<std::vector<std::string>> heldout(p.bundle.unpaired_text.begin() + split,
                                                  p.bundle.unpaired_text.end());
    const Vocabulary& vocab = p.artifacts.vocab;
    LMDims dims{vocab.size(), 16, 32, 32};
    LMParams lm = init_lm(dims, 21);
    const double before = perplexity(lm, heldout, vocab);
    LMTrainConfig config;
    config.epochs = 6;
    config.learning_rate = 3e-3;
    config.seed = 21;
    pretrain_lm(lm, train, vocab, config);
    const double after = perplexity(lm, heldout, vocab);

    LMParams uniform = init_lm(dims, 22);
    uniform.store.get("head").fill(0.0);
    const double uniform_ppl = perplexity(uniform, heldout, vocab);
    const double vocab_size = static_cast<double>(vocab.size());

    const bool drop_ok = after <= 0.7 * before;
    const bool uniform_ok = std::abs(uniform_ppl - vocab_size) <= 1e-9 * vocab_size;
    report(7, "lm sanity", drop_ok && uniform_ok,
           fmt("held-out perplexity %.2f -> %.2f (need >= 30%% drop); ", before, after) +
               fmt("uniform predictor %.12f vs vocab %.0f", uniform_ppl, vocab_size));
}

void criterion_8(const DeskPipeline& p) {
    std::size_t seeds_ok = 0;
    std::string detail;
    for (std::uint64_t seed : {1, 2, 3}) {
        WalkConfig wc;
        wc.seed = seed;
        const auto walks = generate_walks(p.world.graph, wc);
        SkipgramConfig sg;
        sg.dim = 16;
        sg.seed = seed;
        const EmbeddingMatrix m = train_skipgram(walks, sg).filtered(
            [&](const std::string& id) { return p.world.graph.has_entity(id); });
        double same_sum = 0.0, cross_sum = 0.0;
        std::size_t same_n = 0, cross_n = 0;
        const auto objects = p.world.all_objects();
        for (std::size_t i = 0; i < objects.size(); ++i) {
            for (std::size_t j = i + 1; j < objects.size(); ++j) {
                const auto* ei = p.world.lexicon.find(objects[i]);
                const auto* ej = p.world.lexicon.find(objects[j]);
                const double cos =
                    cosine_similarity(m.vec(ei->entity_id), m.vec(ej->entity_id));
                if (p.world.scene_of_object(objects[i]) ==
                    p.world.scene_of_object(objects[j])) {
                    same_sum += cos;
                    ++same_n;
                } else {
                    cross_sum += cos;
                    ++cross_n;
                }
            }
        }
        const double gap = same_sum / static_cast<double>(same_n) -
                           cross_sum / static_cast<double>(cross_n);
        if (gap >= 0.1) ++seeds_ok;
        detail += fmt("%.3f ", gap);
    }
    report(8, "embedding neighbor property", seeds_ok == 3,
           "same-scene minus cross-scene mean cosine gaps: " + detail + "(each >= 0.1)");
}

void criterion_9() {
    bool ok = true;
    {  // F1: TP=3 FP=1 FN=2 -> P 0.75, R 0.6, F1 2/3
        std::map<std::string, std::vector<std::string>> gen, ref;
        for (int i = 0; i < 3; ++i) {
            gen["tp" + std::to_string(i)] = {"zebra"};
            ref["tp" + std::to_string(i)] = {"zebra"};
        }
        gen["fp"] = {"zebra"};
        ref["fp"] = {"cat"};
        for (int i = 0; i < 2; ++i) {
            gen["fn" + std::to_string(i)] = {"cat"};
            ref["fn" + std::to_string(i)] = {"zebra"};
        }
        const F1Result r = novel_object_f1(gen, ref, "zebra");
        if (std::abs(r.precision - 0.75) > 1e-12 || std::abs(r.recall - 0.6) > 1e-12 ||
            std::abs(r.f1 - 2.0 / 3.0) > 1e-12) {
            ok = false;
        }
    }
    {  // accuracy: overlaps 1/2 and 2/3 -> mean 0.58333...
        const std::vector<std::vector<double>> preds{{0.9, 0.8, 0.7, 0.1, 0.0},
                                                     {0.9, 0.8, 0.7, 0.1, 0.0}};
        const auto half = accuracy_at_k({preds[0]}, {{0, 3}}, AccuracyMode::FixedK, 2);
        const auto two_thirds =
            accuracy_at_k({preds[1]}, {{0, 1, 4}}, AccuracyMode::FixedK, 3);
        const double mean = (half.value + two_thirds.value) / 2.0;
        if (std::abs(mean - 7.0 / 12.0) > 1e-12) ok = false;
        // adaptive mode over both images at once
        const auto adaptive = accuracy_at_k(preds, {{0, 3}, {0, 1, 4}}, AccuracyMode::Adaptive);
        if (std::abs(adaptive.value - 7.0 / 12.0) > 1e-12) ok = false;
    }
    report(9, "metric oracles", ok,
           ok ? "novel-object F1 and accuracy@K match hand-computed fixtures to 1e-12"
              : "fixture mismatch");
}

void criterion_10(const DeskPipeline& p) {
    std::set<std::string> heldout_words;
    std::set<std::string> heldout_entities;
    for (const auto& ho : p.bundle.heldout_objects) {
        heldout_words.insert(ho.word);
        heldout_entities.insert(ho.entity_id);
    }
    std::size_t train_hits = 0;
    for (const auto& ex : p.bundle.paired_train) {
        for (const auto& tok : ex.caption.tokens) {
            if (heldout_words.count(tok)) ++train_hits;
        }
        for (const auto& label : ex.image.gold_word_labels) {
            if (heldout_words.count(label)) ++train_hits;
        }
        for (const auto& ent : ex.image.gold_entity_labels) {
            if (heldout_entities.count(ent)) ++train_hits;
        }
    }
    std::map<std::string, std::size_t> unpaired_hits;
    for (const auto& word : heldout_words) unpaired_hits[word] = 0;
    for (const auto& sentence : p.bundle.unpaired_text) {
        for (const auto& tok : sentence) {
            if (heldout_words.count(tok)) ++unpaired_hits[tok];
        }
    }
    std::size_t min_unpaired = SIZE_MAX;
    for (const auto& [word, hits] : unpaired_hits) min_unpaired = std::min(min_unpaired, hits);
    const bool ok = train_hits == 0 && min_unpaired >= 1;
    report(10, "protocol scan", ok,
           fmt("held-out hits in paired training: %.0f (need 0); min unpaired occurrences: "
               "%.0f (need >= 1)",
               static_cast<double>(train_hits), static_cast<double>(min_unpaired)));
}

}  // namespace

int main() {
    const auto start = Clock::now();
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    DeskPipeline pipeline = build_desk_pipeline();
    criterion_5(pipeline);
    criterion_6(pipeline);
    criterion_7(pipeline);
    criterion_8(pipeline);
    criterion_9();
    criterion_10(pipeline);
    std::printf("%s: %d/10 criteria passed in %.1f s\n", failures == 0 ? "SUCCESS" : "FAILURE",
                10 - failures, seconds_since(start));
    return failures == 0 ? 0 : 1;
}
