#include "kga/pipeline.hpp"

#include <algorithm>
#include <set>

#include "kga/errors.hpp"

namespace kga {

PipelineArtifacts build_artifacts(const World& world, const DatasetBundle& bundle,
                                  const PipelineConfig& config) {
    PipelineArtifacts artifacts;
    artifacts.vocab = Vocabulary::build(bundle);
    artifacts.columns = LabelColumns::from_world(world);

    // entity vectors from graph walks; relations are trained but not exported
    WalkConfig walks = config.walks;
    const auto sequences = generate_walks(world.graph, walks);
    SkipgramConfig entity_sg = config.entity_skipgram;
    entity_sg.dim = config.entity_dim;
    const EmbeddingMatrix walk_embeddings = train_skipgram(sequences, entity_sg);
    artifacts.entity_embeddings = walk_embeddings.filtered(
        [&](const std::string& id) { return world.graph.has_entity(id); });

    // word vectors from the unpaired corpus, for the closest-word lookup and
    // LM embedding init
    SkipgramConfig word_sg = config.word_skipgram;
    word_sg.dim = config.word_dim;
    artifacts.word_embeddings = train_skipgram(bundle.unpaired_text, word_sg);

    // transfer rules: closest seen object word per held-out object
    std::set<std::string> heldout;
    for (const auto& ho : bundle.heldout_objects) heldout.insert(ho.word);
    std::vector<std::string> seen_objects;
    for (const auto& obj : world.all_objects()) {
        if (!heldout.count(obj) && artifacts.word_embeddings.has(obj)) {
            seen_objects.push_back(obj);
        }
    }
    for (const auto& ho : bundle.heldout_objects) {
        TransferRule rule;
        rule.unseen_word = ho.word;
        rule.unseen_entity = ho.entity_id;
        rule.closest_word = closest_seen_word(ho.word, artifacts.word_embeddings, seen_objects);
        artifacts.rules.push_back(std::move(rule));
    }
    return artifacts;
}

LMParams pretrain_language_model(const DatasetBundle& bundle, const PipelineArtifacts& artifacts,
                                 const PipelineConfig& config, const EpochCallback& on_epoch) {
    LMDims dims;
    dims.vocab = artifacts.vocab.size();
    dims.embedding = config.word_dim;
    dims.hidden1 = config.hidden1;
    dims.hidden2 = config.hidden2;
    LMParams lm = init_lm(dims, config.lm_train.seed, &artifacts.word_embeddings,
                          &artifacts.vocab);
    pretrain_lm(lm, bundle.unpaired_text, artifacts.vocab, config.lm_train, on_epoch);
    return lm;
}

void apply_classifier_features(World& world, DatasetBundle& bundle,
                               const PipelineConfig& config) {
    if (bundle.paired_train.empty()) {
        throw InvalidArgument("apply_classifier_features: no paired training data");
    }
    std::vector<std::vector<double>> features;
    std::vector<std::set<std::string>> labelsets;
    std::set<std::string> observed;
    for (const auto& ex : bundle.paired_train) {
        features.push_back(ex.image.features);
        labelsets.push_back(ex.image.gold_word_labels);
        observed.insert(ex.image.gold_word_labels.begin(), ex.image.gold_word_labels.end());
    }
    // the classifier can only learn labels the paired split exhibits;
    // held-out columns keep their sampled probabilities, playing the part
    // of an external recognizer that does know those objects
    std::vector<std::string> trainable;
    std::vector<std::size_t> trainable_cols;
    for (std::size_t col = 0; col < world.word_label_inventory.size(); ++col) {
        if (observed.count(world.word_label_inventory[col])) {
            trainable.push_back(world.word_label_inventory[col]);
            trainable_cols.push_back(col);
        }
    }
    MultiLabelClassifier clf = init_multilabel(trainable, world.word_label_inventory.size(),
                                               config.classifier_train.seed);
    train_multilabel(clf, features, labelsets, config.classifier_train);
    auto replace = [&](std::vector<PairedExample>& split) {
        for (auto& ex : split) {
            const std::vector<double> predicted = predict_labels(clf, ex.image.features);
            std::vector<double> fused = ex.image.features;
            for (std::size_t i = 0; i < trainable_cols.size(); ++i) {
                fused[trainable_cols[i]] = predicted[i];
            }
            ex.image.features = std::move(fused);
        }
    };
    replace(bundle.paired_train);
    replace(bundle.paired_val);
    replace(bundle.paired_test);
}

CGMDims cgm_dims_for(const Vocabulary& vocab, const LMParams& lm,
                     const PipelineArtifacts& artifacts, const DatasetBundle& bundle) {
    if (bundle.paired_train.empty() && bundle.paired_test.empty()) {
        throw InvalidArgument("cgm_dims_for: bundle has no paired data");
    }
    const ImageRecord& sample = bundle.paired_train.empty() ? bundle.paired_test.front().image
                                                            : bundle.paired_train.front().image;
    return {vocab.size(), lm.dims.hidden2, artifacts.entity_embeddings.dim,
            sample.features.size()};
}

}  // namespace kga
