#include "kga/labelers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "kga/errors.hpp"
#include "kga/rng.hpp"
#include "kga/weights_io.hpp"

namespace kga {

std::set<std::string> extract_word_labels(const std::vector<std::string>& tokens,
                                          const Lexicon& lexicon, std::size_t* skipped) {
    std::set<std::string> labels;
    std::size_t missing = 0;
    for (const auto& tok : tokens) {
        const LexiconEntry* entry = lexicon.find(tok);
        if (entry == nullptr) {
            ++missing;
            continue;
        }
        if (entry->pos == PosTag::Noun || entry->pos == PosTag::Verb ||
            entry->pos == PosTag::Adj) {
            labels.insert(tok);
        }
    }
    if (skipped != nullptr) *skipped = missing;
    return labels;
}

std::vector<std::string> link_entities(const std::vector<std::string>& tokens,
                                       const Lexicon& lexicon) {
    std::vector<std::string> ea;
    for (const auto& tok : tokens) {
        const LexiconEntry* entry = lexicon.find(tok);
        if (entry == nullptr || entry->entity_id.empty()) continue;
        if (std::find(ea.begin(), ea.end(), entry->entity_id) == ea.end()) {
            ea.push_back(entry->entity_id);
        }
    }
    return ea;
}

std::size_t MultiLabelClassifier::feature_dim() const {
    return store.get("weights").cols();
}

MultiLabelClassifier init_multilabel(const std::vector<std::string>& labels,
                                     std::size_t feature_dim, std::uint64_t seed) {
    if (labels.empty() || feature_dim == 0) {
        throw InvalidArgument("init_multilabel: labels and feature_dim must be non-empty");
    }
    MultiLabelClassifier clf;
    clf.labels = labels;
    Rng rng(seed);
    Tensor w = Tensor::zeros({labels.size(), feature_dim});
    for (double& x : w.values) x = rng.uniform(-0.08, 0.08);
    clf.store.add("weights", std::move(w));
    clf.store.add("bias", Tensor::zeros({labels.size()}));
    return clf;
}

double multilabel_loss(const MultiLabelClassifier& clf,
                       const std::vector<std::vector<double>>& features,
                       const std::vector<std::set<std::string>>& labelsets, ParamStore* grads) {
    if (features.size() != labelsets.size() || features.empty()) {
        throw InvalidArgument("multilabel_loss: features and labelsets must align");
    }
    const Tensor& w = clf.store.get("weights");
    const Tensor& b = clf.store.get("bias");
    const std::size_t n_labels = clf.labels.size();
    Tensor* dw = nullptr;
    Tensor* db = nullptr;
    if (grads != nullptr) {
        if (!grads->has("weights")) {
            grads->add("weights", Tensor::zeros(w.shape));
            grads->add("bias", Tensor::zeros(b.shape));
        }
        dw = &grads->get("weights");
        db = &grads->get("bias");
        dw->fill(0.0);
        db->fill(0.0);
    }

    const double denom = static_cast<double>(features.size() * n_labels);
    double loss = 0.0;
    for (std::size_t ex = 0; ex < features.size(); ++ex) {
        const auto& x = features[ex];
        if (x.size() != w.cols()) throw InvalidArgument("multilabel_loss: feature dim mismatch");
        for (std::size_t l = 0; l < n_labels; ++l) {
            const double z = dot(w.row(l), std::span<const double>(x)) + b.values[l];
            const double p = 1.0 / (1.0 + std::exp(-z));
            const bool y = labelsets[ex].count(clf.labels[l]) > 0;
            loss += y ? -std::log(std::max(p, 1e-300)) : -std::log(std::max(1.0 - p, 1e-300));
            if (grads != nullptr) {
                const double dz = (p - (y ? 1.0 : 0.0)) / denom;
                axpy(dz, std::span<const double>(x), dw->row(l));
                db->values[l] += dz;
            }
        }
    }
    return loss / denom;
}

void train_multilabel(MultiLabelClassifier& clf,
                      const std::vector<std::vector<double>>& features,
                      const std::vector<std::set<std::string>>& labelsets,
                      const MultiLabelTrainConfig& config, std::vector<double>* epoch_loss) {
    std::set<std::string> observed;
    for (const auto& ls : labelsets) observed.insert(ls.begin(), ls.end());
    for (const auto& label : clf.labels) {
        if (!observed.count(label)) {
            throw InvalidArgument("train_multilabel: label never observed: " + label);
        }
    }
    AdamState adam;
    adam.hyper.learning_rate = config.learning_rate;
    ParamStore grads;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const double loss = multilabel_loss(clf, features, labelsets, &grads);
        adam_step(clf.store, grads, adam);
        if (epoch_loss != nullptr) epoch_loss->push_back(loss);
    }
}

std::vector<double> predict_labels(const MultiLabelClassifier& clf,
                                   std::span<const double> features) {
    const Tensor& w = clf.store.get("weights");
    if (features.size() != w.cols()) {
        throw InvalidArgument("predict_labels: feature dim mismatch");
    }
    const Tensor& b = clf.store.get("bias");
    std::vector<double> out(clf.labels.size());
    for (std::size_t l = 0; l < clf.labels.size(); ++l) {
        out[l] = 1.0 / (1.0 + std::exp(-(dot(w.row(l), features) + b.values[l])));
    }
    return out;
}

void save_classifier(const MultiLabelClassifier& clf, const std::filesystem::path& weights_path,
                     const std::filesystem::path& labels_path) {
    write_weights(clf.store, weights_path);
    std::ofstream out(labels_path);
    if (!out) throw IoError("cannot open for writing: " + labels_path.string());
    for (std::size_t i = 0; i < clf.labels.size(); ++i) {
        out << nlohmann::json{{"label", clf.labels[i]}, {"index", i}}.dump() << '\n';
    }
}

MultiLabelClassifier load_classifier(const std::filesystem::path& weights_path,
                                     const std::filesystem::path& labels_path) {
    MultiLabelClassifier clf;
    clf.store = read_weights(weights_path);
    std::ifstream in(labels_path);
    if (!in) throw IoError("cannot open for reading: " + labels_path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(labels_path.string() + ": line " + std::to_string(line_no) + ": " +
                             e.what());
        }
        if (j.at("index").get<std::size_t>() != clf.labels.size()) {
            throw ParseError(labels_path.string() + ": label indexes must be dense and ordered");
        }
        clf.labels.push_back(j.at("label").get<std::string>());
    }
    if (clf.labels.size() != clf.store.get("weights").rows()) {
        throw InvalidArgument("label inventory does not match classifier weights");
    }
    return clf;
}

AccuracyResult accuracy_at_k(const std::vector<std::vector<double>>& predictions,
                             const std::vector<std::set<std::size_t>>& gold_label_indexes,
                             AccuracyMode mode, std::size_t k) {
    if (predictions.size() != gold_label_indexes.size()) {
        throw InvalidArgument("accuracy_at_k: predictions and gold sets must align");
    }
    if (mode == AccuracyMode::FixedK && k == 0) {
        throw InvalidArgument("accuracy_at_k: fixed mode needs k >= 1");
    }
    AccuracyResult result;
    double sum = 0.0;
    for (std::size_t ex = 0; ex < predictions.size(); ++ex) {
        const auto& gold = gold_label_indexes[ex];
        if (gold.empty()) {
            ++result.skipped;
            continue;
        }
        const auto& p = predictions[ex];
        for (std::size_t g : gold) {
            if (g >= p.size()) throw InvalidArgument("accuracy_at_k: gold index out of range");
        }
        const std::size_t top_k = std::min(mode == AccuracyMode::Adaptive ? gold.size() : k,
                                           p.size());
        std::vector<std::size_t> order(p.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (p[a] != p[b]) return p[a] > p[b];
            return a < b;  // ties by ascending label index
        });
        std::size_t hits = 0;
        for (std::size_t i = 0; i < top_k; ++i) {
            if (gold.count(order[i])) ++hits;
        }
        sum += static_cast<double>(hits) / static_cast<double>(gold.size());
        ++result.scored;
    }
    result.value = result.scored ? sum / static_cast<double>(result.scored) : 0.0;
    return result;
}

}  // namespace kga
