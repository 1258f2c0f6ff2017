// kga: synthetic-world caption pipeline with entity attention and
// constrained inference. Subcommands cover the whole flow: gen-world,
// embed, pretrain-lm, train-cgm, generate, eval, ablate, sweep.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "kga/corpus.hpp"
#include "kga/errors.hpp"
#include "kga/eval.hpp"
#include "kga/inference.hpp"
#include "kga/kb_embed.hpp"
#include "kga/lm.hpp"
#include "kga/pipeline.hpp"
#include "kga/run_config.hpp"
#include "kga/weights_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace kga;

namespace {

struct CommonArgs {
    std::string profile = "desk";
    std::string config_file;
    std::vector<std::string> overrides;  // key=value
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--profile", args.profile, "configuration profile (desk, paper-defaults)");
    cmd->add_option("--config", args.config_file, "JSON config file");
    cmd->add_option("--set", args.overrides, "override a config key (key=value), repeatable");
}

RunConfig resolve_config(const CommonArgs& args) {
    RunConfig config = RunConfig::profile(args.profile);
    if (!args.config_file.empty()) config.load_file(args.config_file);
    for (const auto& kv : args.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw InvalidArgument("--set expects key=value, got: " + kv);
        }
        config.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return config;
}

void write_run_manifest(const fs::path& dir, const std::string& command,
                        const RunConfig& config) {
    fs::create_directories(dir);
    json artifacts = json::array();
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name != "run.json") artifacts.push_back(name);
    }
    json resolved = json::object();
    std::istringstream dump(config.dump());
    std::string line;
    while (std::getline(dump, line)) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) resolved[line.substr(0, eq)] = line.substr(eq + 1);
    }
    std::ofstream out(dir / "run.json");
    if (!out) throw IoError("cannot open for writing: " + (dir / "run.json").string());
    out << json{{"command", command},
                {"config_hash", config.hash()},
                {"config", resolved},
                {"artifacts", artifacts}}
               .dump(2)
        << '\n';
    std::cout << command << ": config hash " << config.hash() << "\n";
}

WorldConfig world_config_of(const RunConfig& config) {
    WorldConfig wc;
    wc.objects = config.u64("world.objects");
    wc.scenes = config.u64("world.scenes");
    wc.adjectives_per_scene = config.u64("world.adjectives");
    wc.verbs_per_scene = config.u64("world.verbs");
    wc.extra_edges = config.u64("world.extra_edges");
    wc.embedding_dim = config.u64("dims.entity");
    return wc;
}

PipelineConfig pipeline_config_of(const RunConfig& config) {
    PipelineConfig pc;
    pc.word_dim = config.u64("dims.word");
    pc.entity_dim = config.u64("dims.entity");
    pc.hidden1 = config.u64("dims.hidden1");
    pc.hidden2 = config.u64("dims.hidden2");
    pc.walks.walks_per_entity = config.u64("walks.per_entity");
    pc.walks.depth = config.u64("walks.depth");
    pc.walks.seed = config.u64("walks.seed");
    for (SkipgramConfig* sg : {&pc.entity_skipgram, &pc.word_skipgram}) {
        sg->window = config.u64("sg.window");
        sg->negative_samples = config.u64("sg.negatives");
        sg->epochs = config.u64("sg.epochs");
        sg->learning_rate = config.f64("sg.lr");
        sg->seed = config.u64("sg.seed");
    }
    pc.lm_train.epochs = config.u64("lm.epochs");
    pc.lm_train.batch_size = config.u64("lm.batch");
    pc.lm_train.learning_rate = config.f64("lm.lr");
    pc.lm_train.clip_norm = config.f64("lm.clip");
    pc.lm_train.seed = config.u64("lm.seed");
    pc.cgm_train.epochs = config.u64("cgm.epochs");
    pc.cgm_train.batch_size = config.u64("cgm.batch");
    pc.cgm_train.learning_rate = config.f64("cgm.lr");
    pc.cgm_train.clip_norm = config.f64("cgm.clip");
    pc.cgm_train.seed = config.u64("cgm.seed");
    pc.cgm_train.enable_esa = config.flag("cgm.esa");
    pc.classifier_features = config.flag("features.classifier");
    pc.classifier_train.epochs = config.u64("classifier.epochs");
    pc.classifier_train.learning_rate = config.f64("classifier.lr");
    pc.classifier_train.seed = config.u64("classifier.seed");
    return pc;
}

TransferOptions transfer_options_of(const RunConfig& config) {
    TransferOptions opt;
    opt.copy_textual_row = config.flag("transfer.copy_textual");
    opt.remap_self_feature = config.flag("transfer.remap_self");
    return opt;
}

std::vector<std::string> heldout_words_of(const RunConfig& config, const World& world) {
    std::vector<std::string> words = config.list("data.heldout");
    if (!words.empty()) return words;
    // default: first object of the first two scenes
    return {world.scenes[0].objects.front(), world.scenes[1].objects.front()};
}

LMDims lm_dims_from_store(const ParamStore& store) {
    LMDims dims;
    dims.vocab = store.get("embed").rows();
    dims.embedding = store.get("embed").cols();
    dims.hidden1 = store.get("l1.Wx").rows() / 4;
    dims.hidden2 = store.get("l2.Wx").rows() / 4;
    return dims;
}

CGMDims cgm_dims_from_store(const ParamStore& store) {
    CGMDims dims;
    dims.vocab = store.get("W_h2").rows();
    dims.hidden = store.get("W_h2").cols();
    dims.entity_dim = store.get("W_c").cols();
    dims.image_dim = store.get("W_I").cols();
    return dims;
}

std::vector<TransferRule> rules_from_artifacts(const World& world, const DatasetBundle& bundle,
                                               const EmbeddingMatrix& words) {
    std::set<std::string> heldout;
    for (const auto& ho : bundle.heldout_objects) heldout.insert(ho.word);
    std::vector<std::string> seen;
    for (const auto& obj : world.all_objects()) {
        if (!heldout.count(obj) && words.has(obj)) seen.push_back(obj);
    }
    std::vector<TransferRule> rules;
    for (const auto& ho : bundle.heldout_objects) {
        rules.push_back({ho.word, closest_seen_word(ho.word, words, seen), ho.entity_id});
    }
    return rules;
}

void write_train_log(const fs::path& path, const std::vector<std::pair<std::size_t, double>>& log) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    for (const auto& [epoch, loss] : log) {
        out << json{{"epoch", epoch}, {"loss", loss}}.dump() << '\n';
    }
}

// ---- subcommand bodies ---------------------------------------------------

int cmd_gen_world(const RunConfig& config, const std::string& out_dir) {
    const std::uint64_t seed = config.u64("data.seed");
    World world = build_world(seed, world_config_of(config));
    SampleSizes sizes;
    sizes.unpaired = config.u64("data.unpaired");
    sizes.train = config.u64("data.train");
    sizes.val = config.u64("data.val");
    sizes.test = config.u64("data.test");
    sizes.min_test_mentions = config.u64("data.min_test_mentions");
    DatasetBundle bundle = sample_dataset(world, seed, sizes, heldout_words_of(config, world));

    const fs::path dir(out_dir);
    write_world(world, dir);
    write_bundle(bundle, dir, {seed, config.hash()});
    Vocabulary::build(bundle).write(dir / "vocab.jsonl");
    write_run_manifest(dir, "gen-world", config);
    std::cout << "world: " << world.all_objects().size() << " objects, "
              << world.graph.edges.size() << " edges; bundle: " << bundle.paired_train.size()
              << " train / " << bundle.paired_test.size() << " test\n";
    return 0;
}

int cmd_embed(const RunConfig& config, const std::string& data_dir,
              const std::string& out_dir) {
    const fs::path data(data_dir);
    World world = read_world(data);
    DatasetBundle bundle = read_bundle(data);
    PipelineConfig pc = pipeline_config_of(config);

    const auto walks = generate_walks(world.graph, pc.walks);
    SkipgramConfig entity_sg = pc.entity_skipgram;
    entity_sg.dim = pc.entity_dim;
    std::vector<double> entity_losses;
    EmbeddingMatrix entities =
        train_skipgram(walks, entity_sg, &entity_losses)
            .filtered([&](const std::string& id) { return world.graph.has_entity(id); });
    SkipgramConfig word_sg = pc.word_skipgram;
    word_sg.dim = pc.word_dim;
    EmbeddingMatrix words = train_skipgram(bundle.unpaired_text, word_sg);

    const fs::path dir(out_dir);
    fs::create_directories(dir);
    export_embeddings(entities, dir / "entities.kgae");
    export_embeddings(words, dir / "words.kgae");
    write_run_manifest(dir, "embed", config);
    std::cout << "entities: " << entities.ids.size() << " vectors of dim " << entities.dim
              << "; words: " << words.ids.size() << " of dim " << words.dim << "\n";
    for (const auto& ho : bundle.heldout_objects) {
        std::cout << "top-5 neighbors of " << ho.entity_id << ":";
        for (const auto& n : nearest_neighbors(entities, ho.entity_id, 5)) {
            std::cout << ' ' << n.id;
        }
        std::cout << "\n";
    }
    return 0;
}

int cmd_pretrain_lm(const RunConfig& config, const std::string& data_dir,
                    const std::string& embed_dir, const std::string& out_dir) {
    const fs::path data(data_dir);
    DatasetBundle bundle = read_bundle(data);
    Vocabulary vocab = Vocabulary::read(data / "vocab.jsonl");
    PipelineConfig pc = pipeline_config_of(config);

    LMDims dims{vocab.size(), pc.word_dim, pc.hidden1, pc.hidden2};
    LMParams lm;
    if (!embed_dir.empty()) {
        EmbeddingMatrix words = import_embeddings(fs::path(embed_dir) / "words.kgae",
                                                  pc.word_dim);
        lm = init_lm(dims, pc.lm_train.seed, &words, &vocab);
    } else {
        lm = init_lm(dims, pc.lm_train.seed);
    }
    std::vector<std::pair<std::size_t, double>> log;
    pretrain_lm(lm, bundle.unpaired_text, vocab, pc.lm_train,
                [&](std::size_t epoch, double loss) { log.emplace_back(epoch, loss); });

    const fs::path dir(out_dir);
    fs::create_directories(dir);
    write_weights(lm.store, dir / "lm.kgaw");
    write_train_log(dir / "lm_train_log.jsonl", log);
    write_run_manifest(dir, "pretrain-lm", config);
    std::cout << "pretrained LM: vocab " << dims.vocab << ", hidden " << dims.hidden1 << "/"
              << dims.hidden2 << ", final loss " << (log.empty() ? 0.0 : log.back().second)
              << "\n";
    return 0;
}

int cmd_train_cgm(const RunConfig& config, const std::string& data_dir,
                  const std::string& lm_file, const std::string& embed_dir,
                  const std::string& out_dir) {
    const fs::path data(data_dir);
    DatasetBundle bundle = read_bundle(data);
    Vocabulary vocab = Vocabulary::read(data / "vocab.jsonl");
    PipelineConfig pc = pipeline_config_of(config);
    if (pc.classifier_features) {
        World world = read_world(data);
        apply_classifier_features(world, bundle, pc);
    }

    LMParams lm;
    lm.store = read_weights(lm_file);
    lm.dims = lm_dims_from_store(lm.store);
    EmbeddingMatrix entities = import_embeddings(fs::path(embed_dir) / "entities.kgae",
                                                 pc.entity_dim);
    CGMDims dims{vocab.size(), lm.dims.hidden2, entities.dim,
                 bundle.paired_train.front().image.features.size()};
    CGMParams cgm = init_cgm(dims, pc.cgm_train.seed);
    std::vector<std::pair<std::size_t, double>> log;
    train_cgm(lm, cgm, bundle.paired_train, vocab, entities, pc.cgm_train,
              [&](std::size_t epoch, double loss) { log.emplace_back(epoch, loss); });

    const fs::path dir(out_dir);
    fs::create_directories(dir);
    write_weights(cgm.store, dir / "cgm.kgaw");
    write_train_log(dir / "cgm_train_log.jsonl", log);
    write_run_manifest(dir, "train-cgm", config);
    std::cout << "trained caption model (" << (pc.cgm_train.enable_esa ? "ESA on" : "ESA off")
              << "), final loss " << (log.empty() ? 0.0 : log.back().second) << "\n";
    return 0;
}

int cmd_generate(const RunConfig& config, const std::string& data_dir,
                 const std::string& lm_file, const std::string& cgm_file,
                 const std::string& embed_dir, const std::string& out_dir) {
    const fs::path data(data_dir);
    World world = read_world(data);
    DatasetBundle bundle = read_bundle(data);
    Vocabulary vocab = Vocabulary::read(data / "vocab.jsonl");
    PipelineConfig pc = pipeline_config_of(config);
    if (pc.classifier_features) apply_classifier_features(world, bundle, pc);

    LMParams lm;
    lm.store = read_weights(lm_file);
    lm.dims = lm_dims_from_store(lm.store);
    CGMParams cgm;
    cgm.store = read_weights(cgm_file);
    cgm.dims = cgm_dims_from_store(cgm.store);
    EmbeddingMatrix entities = import_embeddings(fs::path(embed_dir) / "entities.kgae");
    EmbeddingMatrix words = import_embeddings(fs::path(embed_dir) / "words.kgae");
    const LabelColumns columns = LabelColumns::from_world(world);
    const auto rules = rules_from_artifacts(world, bundle, words);

    CGMConfig cgm_cfg;
    cgm_cfg.enable_esa = config.flag("cgm.esa");
    cgm_cfg.enable_ci = config.flag("gen.ci");
    cgm_cfg.max_caption_len = config.u64("gen.max_len");
    GenerateConfig gen;
    gen.beam_width = config.u64("gen.beam");
    gen.max_len = config.u64("gen.max_len");
    gen.ci_enabled = config.flag("gen.ci");
    gen.recompute_trigger_step = config.flag("gen.recompute_trigger");
    gen.transfer = transfer_options_of(config);

    const fs::path dir(out_dir);
    fs::create_directories(dir / "attention");
    std::ofstream out(dir / "captions.jsonl");
    if (!out) throw IoError("cannot open for writing: " + (dir / "captions.jsonl").string());
    for (const auto& ex : bundle.paired_test) {
        GenerationResult r =
            generate(lm, cgm, cgm_cfg, ex.image, rules, gen, vocab, entities, columns);
        const std::string attention_file = "attention/" + ex.image.id + ".csv";
        dump_attention(r.trace, dir / attention_file);
        json fired = json::array();
        for (const auto& rule : r.fired_rules) {
            fired.push_back(json{{"unseen", rule.unseen_word}, {"closest", rule.closest_word}});
        }
        out << json{{"image_id", ex.image.id},
                    {"tokens", r.tokens},
                    {"log_prob", r.log_prob},
                    {"truncated", r.truncated},
                    {"fired_rules", fired},
                    {"attention_csv", attention_file}}
                   .dump()
            << '\n';
    }
    write_run_manifest(dir, "generate", config);
    std::cout << "generated " << bundle.paired_test.size() << " captions (beam "
              << gen.beam_width << ", CI " << (gen.ci_enabled ? "on" : "off") << ")\n";
    return 0;
}

std::map<std::string, std::vector<std::string>> read_captions_jsonl(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    std::map<std::string, std::vector<std::string>> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(path.string() + ": line " + std::to_string(line_no) + ": " +
                             e.what());
        }
        out[j.at("image_id").get<std::string>()] =
            j.at("tokens").get<std::vector<std::string>>();
    }
    return out;
}

int cmd_eval(const RunConfig& config, const std::string& data_dir,
             const std::string& captions_file, const std::string& lm_file,
             const std::string& cgm_file, const std::string& embed_dir,
             const std::string& out_dir) {
    const fs::path data(data_dir);
    DatasetBundle bundle = read_bundle(data);
    Vocabulary vocab = Vocabulary::read(data / "vocab.jsonl");

    const auto generated = read_captions_jsonl(captions_file);
    std::map<std::string, std::vector<std::string>> references;
    for (const auto& ex : bundle.paired_test) references[ex.image.id] = ex.caption.tokens;

    double nll = std::numeric_limits<double>::quiet_NaN();
    if (!lm_file.empty() && !cgm_file.empty() && !embed_dir.empty()) {
        LMParams lm;
        lm.store = read_weights(lm_file);
        lm.dims = lm_dims_from_store(lm.store);
        CGMParams cgm;
        cgm.store = read_weights(cgm_file);
        cgm.dims = cgm_dims_from_store(cgm.store);
        EmbeddingMatrix entities = import_embeddings(fs::path(embed_dir) / "entities.kgae");
        nll = mean_test_nll(lm, cgm, config.flag("cgm.esa"), bundle.paired_test, vocab,
                            entities);
    }

    AblationResult row;
    row.mode = config.flag("cgm.esa") ? (config.flag("gen.ci") ? AblationMode::EsaCi
                                                               : AblationMode::OnlyESA)
                                      : (config.flag("gen.ci") ? AblationMode::OnlyCI
                                                               : AblationMode::None);
    row.beam = config.u64("gen.beam");
    row.seed = config.u64("cgm.seed");
    row.test_nll = nll;
    double f1_sum = 0.0;
    for (const auto& ho : bundle.heldout_objects) {
        const F1Result f1 = novel_object_f1(generated, references, ho.word);
        row.per_object.emplace(ho.word, f1);
        f1_sum += f1.f1;
        std::cout << ho.word << ": P=" << f1.precision << " R=" << f1.recall
                  << " F1=" << f1.f1 << "\n";
    }
    row.mean_f1 = f1_sum / static_cast<double>(bundle.heldout_objects.size());
    std::cout << "mean F1 " << row.mean_f1 << ", test NLL " << nll << "\n";

    const fs::path dir(out_dir);
    fs::create_directories(dir);
    write_report({row}, dir / "eval.csv", dir / "eval.jsonl");
    write_run_manifest(dir, "eval", config);
    return 0;
}

int cmd_ablate(const RunConfig& config, const std::string& data_dir,
               const std::string& lm_file, const std::string& embed_dir,
               const std::string& out_dir) {
    const fs::path data(data_dir);
    World world = read_world(data);
    DatasetBundle bundle = read_bundle(data);
    Vocabulary vocab = Vocabulary::read(data / "vocab.jsonl");
    PipelineConfig pc = pipeline_config_of(config);

    LMParams lm;
    lm.store = read_weights(lm_file);
    lm.dims = lm_dims_from_store(lm.store);
    EmbeddingMatrix entities = import_embeddings(fs::path(embed_dir) / "entities.kgae");
    EmbeddingMatrix words = import_embeddings(fs::path(embed_dir) / "words.kgae");
    const LabelColumns columns = LabelColumns::from_world(world);
    const auto rules = rules_from_artifacts(world, bundle, words);

    AblationConfig ac;
    ac.cgm_train = pc.cgm_train;
    ac.max_len = config.u64("gen.max_len");
    ac.transfer = transfer_options_of(config);
    ac.beams.clear();
    for (const auto& b : config.list("ablate.beams")) ac.beams.push_back(std::stoull(b));
    std::vector<std::uint64_t> seeds;
    for (const auto& s : config.list("ablate.seeds")) seeds.push_back(std::stoull(s));

    const auto results =
        ablation_run(bundle, lm, vocab, entities, rules, columns, ac, seeds);
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    write_report(results, dir / "report.csv", dir / "report.jsonl");
    write_run_manifest(dir, "ablate", config);
    for (const auto& r : results) {
        std::cout << ablation_mode_name(r.mode) << " k=" << r.beam << " seed=" << r.seed
                  << " meanF1=" << r.mean_f1 << " NLL=" << r.test_nll << "\n";
    }
    return 0;
}

int cmd_sweep(const RunConfig& config, const std::string& data_dir,
              const std::string& out_dir) {
    const fs::path data(data_dir);
    World world = read_world(data);
    DatasetBundle bundle = read_bundle(data);
    PipelineConfig base = pipeline_config_of(config);

    const fs::path dir(out_dir);
    fs::create_directories(dir);
    std::ofstream csv(dir / "sweep.csv");
    if (!csv) throw IoError("cannot open for writing: " + (dir / "sweep.csv").string());
    csv << "# caption quality reported as per-token NLL plus novel-object F1\n";
    csv << "hidden1,hidden2,beam,mean_f1,test_nll\n";

    for (const auto& pair : config.list("sweep.pairs")) {
        const auto x = pair.find('x');
        if (x == std::string::npos) {
            throw InvalidArgument("sweep.pairs entries must look like 16x32, got: " + pair);
        }
        PipelineConfig pc = base;
        pc.hidden1 = std::stoull(pair.substr(0, x));
        pc.hidden2 = std::stoull(pair.substr(x + 1));

        PipelineArtifacts art = build_artifacts(world, bundle, pc);
        LMParams lm = pretrain_language_model(bundle, art, pc);
        AblationConfig ac;
        ac.cgm_train = pc.cgm_train;
        ac.max_len = config.u64("gen.max_len");
        ac.transfer = transfer_options_of(config);
        ac.beams = {config.u64("gen.beam")};
        const auto results = ablation_run(bundle, lm, art.vocab, art.entity_embeddings,
                                          art.rules, art.columns, ac,
                                          {config.u64("cgm.seed")});
        for (const auto& r : results) {
            if (r.mode != AblationMode::EsaCi) continue;
            csv << pc.hidden1 << ',' << pc.hidden2 << ',' << r.beam << ','
                << format_double(r.mean_f1) << ',' << format_double(r.test_nll) << '\n';
            std::cout << "hidden " << pc.hidden1 << "/" << pc.hidden2
                      << ": meanF1=" << r.mean_f1 << " NLL=" << r.test_nll << "\n";
        }
    }
    write_run_manifest(dir, "sweep", config);
    return 0;
}

int error_exit(const char* category, const std::string& message) {
    std::cerr << "error category=" << category << ": " << message << "\n";
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"synthetic-world caption pipeline with entity attention and constrained "
                 "inference"};
    app.require_subcommand(1);

    CommonArgs common;
    std::string data_dir, out_dir, embed_dir, lm_file, cgm_file, captions_file;

    auto* gen_world = app.add_subcommand("gen-world", "generate the world and dataset bundle");
    add_common(gen_world, common);
    gen_world->add_option("--out", out_dir, "output directory")->required();

    auto* embed = app.add_subcommand("embed", "train entity and word embeddings");
    add_common(embed, common);
    embed->add_option("--data", data_dir, "gen-world output directory")->required();
    embed->add_option("--out", out_dir, "output directory")->required();

    auto* pretrain = app.add_subcommand("pretrain-lm", "pretrain the language model");
    add_common(pretrain, common);
    pretrain->add_option("--data", data_dir, "gen-world output directory")->required();
    pretrain->add_option("--embeddings", embed_dir, "embed output directory (word-vector init)");
    pretrain->add_option("--out", out_dir, "output directory")->required();

    auto* train = app.add_subcommand("train-cgm", "train the caption model on paired data");
    add_common(train, common);
    train->add_option("--data", data_dir, "gen-world output directory")->required();
    train->add_option("--lm", lm_file, "pretrained LM weights (KGAW1)")->required();
    train->add_option("--embeddings", embed_dir, "embed output directory")->required();
    train->add_option("--out", out_dir, "output directory")->required();

    auto* generate_cmd = app.add_subcommand("generate", "decode captions for the test split");
    add_common(generate_cmd, common);
    generate_cmd->add_option("--data", data_dir, "gen-world output directory")->required();
    generate_cmd->add_option("--lm", lm_file, "LM weights")->required();
    generate_cmd->add_option("--cgm", cgm_file, "caption-model weights")->required();
    generate_cmd->add_option("--embeddings", embed_dir, "embed output directory")->required();
    generate_cmd->add_option("--out", out_dir, "output directory")->required();

    auto* eval_cmd = app.add_subcommand("eval", "score generated captions against references");
    add_common(eval_cmd, common);
    eval_cmd->add_option("--data", data_dir, "gen-world output directory")->required();
    eval_cmd->add_option("--generated", captions_file, "captions.jsonl from generate")
        ->required();
    eval_cmd->add_option("--lm", lm_file, "LM weights (enables NLL)");
    eval_cmd->add_option("--cgm", cgm_file, "caption-model weights (enables NLL)");
    eval_cmd->add_option("--embeddings", embed_dir, "embed output directory (enables NLL)");
    eval_cmd->add_option("--out", out_dir, "output directory")->required();

    auto* ablate = app.add_subcommand("ablate", "run the four-mode ablation");
    add_common(ablate, common);
    ablate->add_option("--data", data_dir, "gen-world output directory")->required();
    ablate->add_option("--lm", lm_file, "pretrained LM weights")->required();
    ablate->add_option("--embeddings", embed_dir, "embed output directory")->required();
    ablate->add_option("--out", out_dir, "output directory")->required();

    auto* sweep = app.add_subcommand("sweep", "hidden-dimension sweep");
    add_common(sweep, common);
    sweep->add_option("--data", data_dir, "gen-world output directory")->required();
    sweep->add_option("--out", out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    RunConfig config;
    try {
        config = resolve_config(common);
    } catch (const Error& e) {
        std::cerr << "error category=usage: " << e.what() << "\n";
        return 2;
    }

    try {
        if (gen_world->parsed()) return cmd_gen_world(config, out_dir);
        if (embed->parsed()) return cmd_embed(config, data_dir, out_dir);
        if (pretrain->parsed()) return cmd_pretrain_lm(config, data_dir, embed_dir, out_dir);
        if (train->parsed()) return cmd_train_cgm(config, data_dir, lm_file, embed_dir, out_dir);
        if (generate_cmd->parsed()) {
            return cmd_generate(config, data_dir, lm_file, cgm_file, embed_dir, out_dir);
        }
        if (eval_cmd->parsed()) {
            return cmd_eval(config, data_dir, captions_file, lm_file, cgm_file, embed_dir,
                            out_dir);
        }
        if (ablate->parsed()) return cmd_ablate(config, data_dir, lm_file, embed_dir, out_dir);
        if (sweep->parsed()) return cmd_sweep(config, data_dir, out_dir);
    } catch (const InvalidArgument& e) {
        return error_exit("invalid-argument", e.what());
    } catch (const NotFound& e) {
        return error_exit("not-found", e.what());
    } catch (const ContractViolation& e) {
        return error_exit("contract-violation", e.what());
    } catch (const ParseError& e) {
        return error_exit("parse-error", e.what());
    } catch (const IoError& e) {
        return error_exit("io-error", e.what());
    } catch (const Error& e) {
        return error_exit("runtime", e.what());
    } catch (const std::exception& e) {
        return error_exit("runtime", e.what());
    }
    return 0;
}
