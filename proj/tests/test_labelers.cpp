#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "kga/corpus.hpp"
#include "kga/errors.hpp"
#include "kga/grad_check.hpp"
#include "kga/labelers.hpp"
#include "kga/pipeline.hpp"
#include "kga/rng.hpp"

using namespace kga;

namespace {

Lexicon tagged_lexicon() {
    Lexicon lex;
    lex.add({"a", PosTag::Other, {}});
    lex.add({"young", PosTag::Adj, {}});
    lex.add({"child", PosTag::Noun, "Child"});
    lex.add({"brushes", PosTag::Verb, "Brush"});
    lex.add({"his", PosTag::Other, {}});
    lex.add({"teeth", PosTag::Noun, "Tooth"});
    lex.add({"at", PosTag::Other, {}});
    lex.add({"the", PosTag::Other, {}});
    lex.add({"sink", PosTag::Noun, "Sink"});
    return lex;
}

}  // namespace

TEST_CASE("word labels are the content tokens of a caption") {
    const Lexicon lex = tagged_lexicon();
    const std::vector<std::string> caption{"a", "young", "child", "brushes", "his",
                                           "teeth", "at", "the", "sink"};
    const auto labels = extract_word_labels(caption, lex);
    CHECK(labels.count("young"));
    CHECK(labels.count("child"));
    CHECK(labels.count("teeth"));
    CHECK(!labels.count("a"));
    CHECK(!labels.count("his"));

    SUBCASE("all-stopword caption gives the empty set") {
        CHECK(extract_word_labels({"a", "the", "at"}, lex).empty());
    }
    SUBCASE("tokens missing from the lexicon are skipped and counted") {
        std::size_t skipped = 0;
        const auto got = extract_word_labels({"zzz", "child", "qqq"}, lex, &skipped);
        CHECK(got == std::set<std::string>{"child"});
        CHECK(skipped == 2);
    }
    SUBCASE("duplicates collapse to set semantics") {
        CHECK(extract_word_labels({"child", "child", "child"}, lex).size() == 1);
    }
    SUBCASE("matches an independent lexicon filter") {
        std::set<std::string> expected;
        for (const auto& tok : caption) {
            const auto* e = lex.find(tok);
            if (e && e->pos != PosTag::Other) expected.insert(tok);
        }
        CHECK(extract_word_labels(caption, lex) == expected);
    }
}

TEST_CASE("entity linking keeps first-mention order without duplicates") {
    const Lexicon lex = tagged_lexicon();
    const std::vector<std::string> caption{"a", "child", "brushes", "his", "teeth",
                                           "at", "the", "teeth"};
    const auto ea = link_entities(caption, lex);
    CHECK(ea == std::vector<std::string>{"Child", "Brush", "Tooth"});

    SUBCASE("no entity-bearing tokens gives an empty list") {
        CHECK(link_entities({"a", "the"}, lex).empty());
    }
    SUBCASE("order equals a positional scan") {
        std::vector<std::string> expected;
        for (const auto& tok : caption) {
            const auto* e = lex.find(tok);
            if (e == nullptr || e->entity_id.empty()) continue;
            if (std::find(expected.begin(), expected.end(), e->entity_id) == expected.end()) {
                expected.push_back(e->entity_id);
            }
        }
        CHECK(ea == expected);
    }
}

TEST_CASE("multi-label gradient matches central differences") {
    Rng rng(8);
    const std::vector<std::string> labels{"cat", "dog", "sun"};
    MultiLabelClassifier clf = init_multilabel(labels, 4, 8);
    std::vector<std::vector<double>> features;
    std::vector<std::set<std::string>> labelsets;
    for (int i = 0; i < 5; ++i) {
        std::vector<double> x(4);
        for (double& v : x) v = rng.uniform(-1.0, 1.0);
        features.push_back(x);
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
    const auto report = grad_check(loss, clf.store, grads, 1e-5, 1e-4);
    INFO(report.summary());
    CHECK(report.passed());
}

TEST_CASE("a separable toy set trains to perfect adaptive accuracy") {
    // label = sign pattern of a dedicated coordinate
    const std::vector<std::string> labels{"left", "right"};
    std::vector<std::vector<double>> features;
    std::vector<std::set<std::string>> labelsets;
    Rng rng(3);
    for (int i = 0; i < 40; ++i) {
        const bool left = i % 2 == 0;
        features.push_back({left ? rng.uniform(0.5, 1.0) : rng.uniform(-1.0, -0.5),
                            left ? rng.uniform(-1.0, -0.5) : rng.uniform(0.5, 1.0)});
        labelsets.push_back({left ? "left" : "right"});
    }
    MultiLabelClassifier clf = init_multilabel(labels, 2, 1);
    MultiLabelTrainConfig config;
    config.epochs = 200;
    config.learning_rate = 0.1;
    std::vector<double> losses;
    train_multilabel(clf, features, labelsets, config, &losses);
    CHECK(losses.back() < losses.front());

    std::vector<std::vector<double>> predictions;
    std::vector<std::set<std::size_t>> gold;
    for (std::size_t i = 0; i < features.size(); ++i) {
        predictions.push_back(predict_labels(clf, features[i]));
        gold.push_back({labelsets[i].count("left") ? std::size_t{0} : std::size_t{1}});
    }
    const auto result = accuracy_at_k(predictions, gold, AccuracyMode::Adaptive);
    CHECK(result.value == doctest::Approx(1.0));
}

TEST_CASE("zero-epoch training leaves the classifier at initialization") {
    MultiLabelClassifier clf = init_multilabel({"x", "y"}, 3, 5);
    const auto before = clf.store.get("weights").values;
    MultiLabelTrainConfig config;
    config.epochs = 0;
    train_multilabel(clf, {{1.0, 0.0, 0.0}}, {{"x", "y"}}, config);
    CHECK(clf.store.get("weights").values == before);
}

TEST_CASE("training requires every label to be observed") {
    MultiLabelClassifier clf = init_multilabel({"x", "ghost"}, 2, 5);
    CHECK_THROWS_AS(train_multilabel(clf, {{1.0, 0.0}}, {{"x"}}, MultiLabelTrainConfig{}),
                    InvalidArgument);
}

TEST_CASE("prediction is the per-label sigmoid") {
    MultiLabelClassifier clf = init_multilabel({"x", "y"}, 2, 5);
    clf.store.get("weights").fill(0.0);
    clf.store.get("bias").fill(0.0);
    const auto p = predict_labels(clf, std::vector<double>{0.4, -0.7});
    CHECK(p[0] == 0.5);
    CHECK(p[1] == 0.5);

    SUBCASE("matches an independent scalar logistic computation") {
        Rng rng(12);
        for (double& v : clf.store.get("weights").values) v = rng.uniform(-1.0, 1.0);
        for (double& v : clf.store.get("bias").values) v = rng.uniform(-1.0, 1.0);
        const std::vector<double> x{0.3, 0.9};
        const auto q = predict_labels(clf, x);
        const Tensor& w = clf.store.get("weights");
        const Tensor& b = clf.store.get("bias");
        for (std::size_t l = 0; l < 2; ++l) {
            const double z = w.at(l, 0) * x[0] + w.at(l, 1) * x[1] + b.values[l];
            CHECK(q[l] == doctest::Approx(1.0 / (1.0 + std::exp(-z))).epsilon(1e-12));
        }
    }
    SUBCASE("raising one bias raises only that probability") {
        const auto base = predict_labels(clf, std::vector<double>{0.4, -0.7});
        clf.store.get("bias").values[0] += 1.0;
        const auto bumped = predict_labels(clf, std::vector<double>{0.4, -0.7});
        CHECK(bumped[0] > base[0]);
        CHECK(bumped[1] == base[1]);
    }
    SUBCASE("feature dim mismatch is an error") {
        CHECK_THROWS_AS(predict_labels(clf, std::vector<double>{1.0}), InvalidArgument);
    }
}

TEST_CASE("classifier features can replace the sampled image probabilities") {
    World world = build_world(7, WorldConfig{});
    SampleSizes sizes;
    sizes.unpaired = 100;
    sizes.train = 80;
    sizes.val = 10;
    sizes.test = 24;
    sizes.min_test_mentions = 6;
    DatasetBundle bundle = sample_dataset(world, 7, sizes, {"kettle", "bench"});
    const auto before = bundle.paired_test[0].image.features;
    PipelineConfig pc;
    pc.classifier_train.epochs = 5;
    apply_classifier_features(world, bundle, pc);
    const auto& after = bundle.paired_test[0].image.features;
    REQUIRE(after.size() == before.size());
    CHECK(after != before);
    // held-out columns keep their sampled values; the rest are sigmoids
    const auto col_kettle = world.label_column("kettle");
    REQUIRE(col_kettle.has_value());
    CHECK(after[*col_kettle] == before[*col_kettle]);
    for (double v : after) {
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
    }
    // gold labels untouched; only the probability vector is replaced
    CHECK(!bundle.paired_test[0].image.gold_word_labels.empty());
}

TEST_CASE("classifier save/load round-trips weights and the label inventory") {
    MultiLabelClassifier clf = init_multilabel({"kettle", "bowl", "spoon"}, 4, 7);
    const auto dir = std::filesystem::temp_directory_path() / "kga_clf";
    std::filesystem::create_directories(dir);
    save_classifier(clf, dir / "clf.kgaw", dir / "labels.jsonl");
    const MultiLabelClassifier loaded = load_classifier(dir / "clf.kgaw", dir / "labels.jsonl");
    CHECK(loaded.labels == clf.labels);
    CHECK(loaded.store.get("weights").values == clf.store.get("weights").values);
    CHECK(loaded.store.get("bias").values == clf.store.get("bias").values);
    std::filesystem::remove_all(dir);
}

TEST_CASE("accuracy_at_k fixture cases") {
    SUBCASE("gold inside top-K everywhere gives 1.0") {
        const auto r = accuracy_at_k({{0.9, 0.8, 0.1}, {0.7, 0.9, 0.2}},
                                     {{0, 1}, {0, 1}}, AccuracyMode::FixedK, 2);
        CHECK(r.value == 1.0);
    }
    SUBCASE("gold disjoint from top-K gives 0.0") {
        const auto r = accuracy_at_k({{0.9, 0.8, 0.1}}, {{2}}, AccuracyMode::FixedK, 2);
        CHECK(r.value == 0.0);
    }
    SUBCASE("hand-computed mixed case: (1/2 + 2/3) / 2") {
        // image 1: gold {0,3}, top-2 {0,1} -> 1/2; image 2: gold {0,1,4}, top-3 {0,1,2} -> 2/3
        const auto r = accuracy_at_k({{0.9, 0.8, 0.7, 0.1, 0.0}},
                                     {{0, 3}}, AccuracyMode::FixedK, 2);
        const auto r2 = accuracy_at_k({{0.9, 0.8, 0.7, 0.1, 0.0}},
                                      {{0, 1, 4}}, AccuracyMode::FixedK, 3);
        const double mean = (r.value + r2.value) / 2.0;
        CHECK(std::abs(mean - (0.5 + 2.0 / 3.0) / 2.0) <= 1e-12);
    }
    SUBCASE("empty gold sets are skipped and tallied") {
        const auto r = accuracy_at_k({{0.9, 0.1}, {0.9, 0.1}}, {{}, {0}},
                                     AccuracyMode::FixedK, 1);
        CHECK(r.skipped == 1);
        CHECK(r.scored == 1);
        CHECK(r.value == 1.0);
    }
    SUBCASE("fixed-K accuracy is non-decreasing in K") {
        Rng rng(9);
        std::vector<std::vector<double>> preds;
        std::vector<std::set<std::size_t>> gold;
        for (int i = 0; i < 10; ++i) {
            std::vector<double> p(6);
            for (double& v : p) v = rng.uniform();
            preds.push_back(p);
            gold.push_back({rng.uniform_index(6), rng.uniform_index(6)});
        }
        double prev = 0.0;
        for (std::size_t k = 1; k <= 6; ++k) {
            const double v = accuracy_at_k(preds, gold, AccuracyMode::FixedK, k).value;
            CHECK(v >= prev);
            prev = v;
        }
    }
    SUBCASE("ties break by ascending label index") {
        const auto r = accuracy_at_k({{0.5, 0.5, 0.5}}, {{0}}, AccuracyMode::FixedK, 1);
        CHECK(r.value == 1.0);
        const auto r2 = accuracy_at_k({{0.5, 0.5, 0.5}}, {{2}}, AccuracyMode::FixedK, 1);
        CHECK(r2.value == 0.0);
    }
}
