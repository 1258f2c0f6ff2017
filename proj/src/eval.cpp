#include "kga/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "kga/errors.hpp"
#include "kga/weights_io.hpp"

namespace kga {

using nlohmann::json;

namespace {

bool mentions(const std::vector<std::string>& tokens, const std::string& object_word,
              const std::vector<std::string>& aliases) {
    for (const auto& tok : tokens) {
        if (tok == object_word) return true;
        if (std::find(aliases.begin(), aliases.end(), tok) != aliases.end()) return true;
    }
    return false;
}

}  // namespace

F1Result novel_object_f1(const std::map<std::string, std::vector<std::string>>& generated,
                         const std::map<std::string, std::vector<std::string>>& references,
                         const std::string& object_word,
                         const std::vector<std::string>& aliases) {
    if (generated.size() != references.size()) {
        throw InvalidArgument("novel_object_f1: generated and reference id sets differ");
    }
    F1Result out;
    for (const auto& [id, gen_tokens] : generated) {
        auto ref_it = references.find(id);
        if (ref_it == references.end()) {
            throw InvalidArgument("novel_object_f1: no reference for image id " + id);
        }
        const bool in_gen = mentions(gen_tokens, object_word, aliases);
        const bool in_ref = mentions(ref_it->second, object_word, aliases);
        if (in_gen && in_ref) ++out.tp;
        else if (in_gen) ++out.fp;
        else if (in_ref) ++out.fn;
    }
    const double tp = static_cast<double>(out.tp);
    out.precision = (out.tp + out.fp) ? tp / static_cast<double>(out.tp + out.fp) : 0.0;
    out.recall = (out.tp + out.fn) ? tp / static_cast<double>(out.tp + out.fn) : 0.0;
    out.f1 = (out.precision + out.recall) > 0.0
                 ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
                 : 0.0;
    return out;
}

std::string ablation_mode_name(AblationMode mode) {
    switch (mode) {
        case AblationMode::None: return "None";
        case AblationMode::OnlyESA: return "OnlyESA";
        case AblationMode::OnlyCI: return "OnlyCI";
        case AblationMode::EsaCi: return "ESA+CI";
    }
    throw InvalidArgument("unknown ablation mode");
}

namespace {

AblationMode mode_of(bool esa, bool ci) {
    if (esa && ci) return AblationMode::EsaCi;
    if (esa) return AblationMode::OnlyESA;
    if (ci) return AblationMode::OnlyCI;
    return AblationMode::None;
}

AblationMode mode_from_name(const std::string& name) {
    for (AblationMode m : {AblationMode::None, AblationMode::OnlyESA, AblationMode::OnlyCI,
                           AblationMode::EsaCi}) {
        if (ablation_mode_name(m) == name) return m;
    }
    throw ParseError("unknown ablation mode: " + name);
}

}  // namespace

std::vector<AblationResult> ablation_run(const DatasetBundle& bundle, const LMParams& lm,
                                         const Vocabulary& vocab,
                                         const EmbeddingMatrix& entity_embeddings,
                                         const std::vector<TransferRule>& rules,
                                         const LabelColumns& columns,
                                         const AblationConfig& config,
                                         const std::vector<std::uint64_t>& seeds,
                                         const EpochCallback& on_epoch) {
    if (bundle.heldout_objects.empty()) {
        throw InvalidArgument("ablation_run: bundle has no held-out objects");
    }
    if (bundle.paired_train.empty() || bundle.paired_test.empty()) {
        throw InvalidArgument("ablation_run: bundle needs paired train and test splits");
    }
    std::map<std::string, std::vector<std::string>> references;
    for (const auto& ex : bundle.paired_test) references[ex.image.id] = ex.caption.tokens;

    std::vector<AblationResult> results;
    for (std::uint64_t seed : seeds) {
        for (bool esa : {false, true}) {
            CGMDims dims{vocab.size(), lm.dims.hidden2, entity_embeddings.dim,
                         bundle.paired_test.front().image.features.size()};
            CGMParams cgm = init_cgm(dims, seed);
            CGMTrainConfig train = config.cgm_train;
            train.seed = seed;
            train.enable_esa = esa;
            train_cgm(lm, cgm, bundle.paired_train, vocab, entity_embeddings, train, on_epoch);
            const double nll =
                mean_test_nll(lm, cgm, esa, bundle.paired_test, vocab, entity_embeddings);
            if (!std::isfinite(nll)) {
                throw Error("ablation_run: non-finite test NLL in mode esa=" +
                            std::to_string(esa) + " seed=" + std::to_string(seed));
            }

            for (bool ci : {false, true}) {
                for (std::size_t beam : config.beams) {
                    CGMConfig cgm_cfg;
                    cgm_cfg.enable_esa = esa;
                    cgm_cfg.enable_ci = ci;
                    cgm_cfg.max_caption_len = config.max_len;
                    GenerateConfig gen;
                    gen.beam_width = beam;
                    gen.max_len = config.max_len;
                    gen.ci_enabled = ci;
                    gen.transfer = config.transfer;

                    std::map<std::string, std::vector<std::string>> generated;
                    for (const auto& ex : bundle.paired_test) {
                        GenerationResult r = generate(lm, cgm, cgm_cfg, ex.image, rules, gen,
                                                      vocab, entity_embeddings, columns);
                        generated[ex.image.id] = r.tokens;
                    }

                    AblationResult res;
                    res.mode = mode_of(esa, ci);
                    res.beam = beam;
                    res.seed = seed;
                    res.test_nll = nll;
                    double f1_sum = 0.0;
                    for (const auto& ho : bundle.heldout_objects) {
                        F1Result f1 = novel_object_f1(generated, references, ho.word);
                        f1_sum += f1.f1;
                        res.per_object.emplace(ho.word, f1);
                    }
                    res.mean_f1 = f1_sum / static_cast<double>(bundle.heldout_objects.size());
                    results.push_back(std::move(res));
                }
            }
        }
    }
    return results;
}

void write_report(const std::vector<AblationResult>& results,
                  const std::filesystem::path& csv_path,
                  const std::filesystem::path& jsonl_path) {
    static const char* kNote =
        "caption quality reported as per-token NLL plus novel-object F1";
    {
        std::ofstream csv(csv_path);
        if (!csv) throw IoError("cannot open for writing: " + csv_path.string());
        csv << "# " << kNote << "\n";
        csv << "mode,k,object,precision,recall,f1,nll,seed\n";
        for (const auto& r : results) {
            for (const auto& [object, f1] : r.per_object) {
                csv << ablation_mode_name(r.mode) << ',' << r.beam << ',' << object << ','
                    << format_double(f1.precision) << ',' << format_double(f1.recall) << ','
                    << format_double(f1.f1) << ',' << format_double(r.test_nll) << ','
                    << r.seed << '\n';
            }
            csv << ablation_mode_name(r.mode) << ',' << r.beam << ",mean,,,"
                << format_double(r.mean_f1) << ',' << format_double(r.test_nll) << ','
                << r.seed << '\n';
        }
        if (!csv) throw IoError("write failed: " + csv_path.string());
    }
    {
        std::ofstream out(jsonl_path);
        if (!out) throw IoError("cannot open for writing: " + jsonl_path.string());
        out << json{{"note", kNote}}.dump() << '\n';
        for (const auto& r : results) {
            json per_object = json::object();
            for (const auto& [object, f1] : r.per_object) {
                per_object[object] = json{{"precision", f1.precision},
                                          {"recall", f1.recall},
                                          {"f1", f1.f1},
                                          {"tp", f1.tp},
                                          {"fp", f1.fp},
                                          {"fn", f1.fn}};
            }
            out << json{{"mode", ablation_mode_name(r.mode)},
                        {"k", r.beam},
                        {"seed", r.seed},
                        {"per_object", per_object},
                        {"mean_f1", r.mean_f1},
                        {"test_nll", r.test_nll}}
                       .dump()
                << '\n';
        }
        if (!out) throw IoError("write failed: " + jsonl_path.string());
    }
}

std::vector<AblationResult> read_report_jsonl(const std::filesystem::path& jsonl_path) {
    std::ifstream in(jsonl_path);
    if (!in) throw IoError("cannot open for reading: " + jsonl_path.string());
    std::vector<AblationResult> results;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(jsonl_path.string() + ": line " + std::to_string(line_no) + ": " +
                             e.what());
        }
        if (j.contains("note")) continue;  // header row
        AblationResult r;
        r.mode = mode_from_name(j.at("mode").get<std::string>());
        r.beam = j.at("k").get<std::size_t>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.mean_f1 = j.at("mean_f1").get<double>();
        r.test_nll = j.at("test_nll").get<double>();
        for (const auto& [object, f] : j.at("per_object").items()) {
            F1Result f1;
            f1.precision = f.at("precision").get<double>();
            f1.recall = f.at("recall").get<double>();
            f1.f1 = f.at("f1").get<double>();
            f1.tp = f.at("tp").get<std::size_t>();
            f1.fp = f.at("fp").get<std::size_t>();
            f1.fn = f.at("fn").get<std::size_t>();
            r.per_object.emplace(object, f1);
        }
        results.push_back(std::move(r));
    }
    return results;
}

}  // namespace kga
