#include "kga/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>

#include <nlohmann/json.hpp>

#include "kga/errors.hpp"

namespace kga {

using nlohmann::json;

namespace {

// Built-in word pools. Configs larger than the pools fall back to
// synthesized surfaces so arbitrary sizes still work.
const std::array<const char*, 6> kSceneNames = {"kitchen", "park",   "harbor",
                                                "workshop", "market", "meadow"};
const std::array<std::array<const char*, 8>, 6> kObjectPools = {{
    {"kettle", "bowl", "spoon", "oven", "jar", "pan", "cup", "ladle"},
    {"bench", "kite", "ball", "fence", "swing", "slide", "lamp", "cart"},
    {"boat", "rope", "gull", "crate", "anchor", "net", "buoy", "mast"},
    {"hammer", "wrench", "drill", "vise", "chisel", "ladder", "toolbox", "clamp"},
    {"stall", "basket", "melon", "loaf", "coin", "awning", "barrel", "sack"},
    {"sheep", "flower", "brook", "stone", "hive", "nest", "shrub", "trail"},
}};
const std::array<std::array<const char*, 4>, 6> kAdjectivePools = {{
    {"shiny", "warm", "copper", "clean"},
    {"green", "dusty", "bright", "wide"},
    {"salty", "heavy", "grey", "wet"},
    {"rusty", "sturdy", "sharp", "worn"},
    {"ripe", "busy", "cheap", "fresh"},
    {"quiet", "soft", "wild", "pale"},
}};
const std::array<std::array<const char*, 4>, 6> kVerbPools = {{
    {"steams", "rests", "gleams", "simmers"},
    {"drifts", "bounces", "leans", "rolls"},
    {"sways", "floats", "creaks", "drips"},
    {"clatters", "spins", "hangs", "rattles"},
    {"stands", "tilts", "shines", "wobbles"},
    {"grazes", "blooms", "murmurs", "rustles"},
}};
const std::array<const char*, 4> kPrepositions = {"near", "on", "beside", "under"};

std::string entity_id_for(const std::string& surface) {
    std::string id = surface;
    if (!id.empty()) id[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(id[0])));
    return id;
}

std::string synthesized(const char* stem, std::size_t n) {
    return std::string(stem) + std::to_string(n);
}

}  // namespace

std::string pos_tag_name(PosTag tag) {
    switch (tag) {
        case PosTag::Noun: return "NOUN";
        case PosTag::Verb: return "VERB";
        case PosTag::Adj: return "ADJ";
        case PosTag::Other: return "OTHER";
    }
    throw InvalidArgument("unknown pos tag");
}

PosTag pos_tag_from_name(const std::string& name) {
    if (name == "NOUN") return PosTag::Noun;
    if (name == "VERB") return PosTag::Verb;
    if (name == "ADJ") return PosTag::Adj;
    if (name == "OTHER") return PosTag::Other;
    throw ParseError("unknown pos tag: " + name);
}

void Lexicon::add(LexiconEntry entry) {
    if (by_surface_.count(entry.surface)) {
        throw InvalidArgument("duplicate lexicon surface: " + entry.surface);
    }
    by_surface_.emplace(entry.surface, entries_.size());
    entries_.push_back(std::move(entry));
}

const LexiconEntry* Lexicon::find(const std::string& surface) const {
    auto it = by_surface_.find(surface);
    return it == by_surface_.end() ? nullptr : &entries_[it->second];
}

bool KnowledgeGraph::has_entity(const std::string& id) const {
    return std::find(entities.begin(), entities.end(), id) != entities.end();
}

bool KnowledgeGraph::has_edge(const std::string& subject, const std::string& relation,
                              const std::string& object) const {
    for (const auto& e : edges) {
        if (e.subject == subject && e.relation == relation && e.object == object) return true;
    }
    return false;
}

std::vector<const GraphEdge*> KnowledgeGraph::outgoing(const std::string& subject) const {
    std::vector<const GraphEdge*> out;
    for (const auto& e : edges) {
        if (e.subject == subject) out.push_back(&e);
    }
    return out;
}

std::vector<std::string> World::all_objects() const {
    std::vector<std::string> out;
    for (const auto& scene : scenes) {
        out.insert(out.end(), scene.objects.begin(), scene.objects.end());
    }
    return out;
}

std::optional<std::size_t> World::scene_of_object(const std::string& object) const {
    for (std::size_t s = 0; s < scenes.size(); ++s) {
        const auto& objs = scenes[s].objects;
        if (std::find(objs.begin(), objs.end(), object) != objs.end()) return s;
    }
    return std::nullopt;
}

std::optional<std::size_t> World::label_column(const std::string& word) const {
    auto it = std::find(word_label_inventory.begin(), word_label_inventory.end(), word);
    if (it == word_label_inventory.end()) return std::nullopt;
    return static_cast<std::size_t>(it - word_label_inventory.begin());
}

std::size_t World::declared_edge_count() const {
    return 2 * (config.objects + config.extra_edges);
}

World build_world(std::uint64_t seed, const WorldConfig& config) {
    if (config.objects < 12) {
        throw InvalidArgument(
            "world config too small: need at least 12 objects so two can be held out "
            "with same-scene siblings");
    }
    if (config.scenes < 2) throw InvalidArgument("world config too small: need at least 2 scenes");
    if (config.objects < 2 * config.scenes) {
        throw InvalidArgument("world config too small: every scene needs at least 2 objects");
    }
    if (config.adjectives_per_scene == 0 || config.verbs_per_scene == 0) {
        throw InvalidArgument("world config too small: scenes need adjectives and verbs");
    }

    World world;
    world.config = config;
    world.seed = seed;

    // scene word assignments: round-robin objects, fixed pools first
    std::size_t pair_capacity = 0;
    for (std::size_t s = 0; s < config.scenes; ++s) {
        SceneSpec scene;
        scene.name = s < kSceneNames.size() ? kSceneNames[s] : synthesized("scene", s);
        scene.entity = entity_id_for(scene.name);
        const std::size_t count =
            config.objects / config.scenes + (s < config.objects % config.scenes ? 1 : 0);
        for (std::size_t i = 0; i < count; ++i) {
            if (s < kObjectPools.size() && i < kObjectPools[s].size()) {
                scene.objects.push_back(kObjectPools[s][i]);
            } else {
                scene.objects.push_back(synthesized("item", s * 100 + i));
            }
        }
        for (std::size_t i = 0; i < config.adjectives_per_scene; ++i) {
            if (s < kAdjectivePools.size() && i < kAdjectivePools[s].size()) {
                scene.adjectives.push_back(kAdjectivePools[s][i]);
            } else {
                scene.adjectives.push_back(synthesized("adj", s * 100 + i));
            }
        }
        for (std::size_t i = 0; i < config.verbs_per_scene; ++i) {
            if (s < kVerbPools.size() && i < kVerbPools[s].size()) {
                scene.verbs.push_back(kVerbPools[s][i]);
            } else {
                scene.verbs.push_back(synthesized("verb", s * 100 + i));
            }
        }
        pair_capacity += scene.objects.size() * (scene.objects.size() - 1) / 2;
        world.scenes.push_back(std::move(scene));
    }
    if (config.extra_edges > pair_capacity) {
        throw InvalidArgument("world config too small: extra_edges exceeds available "
                              "same-scene object pairs");
    }

    // lexicon
    for (const auto& scene : world.scenes) {
        world.lexicon.add({scene.name, PosTag::Noun, scene.entity});
        for (const auto& obj : scene.objects) {
            world.lexicon.add({obj, PosTag::Noun, entity_id_for(obj)});
        }
        for (const auto& adj : scene.adjectives) world.lexicon.add({adj, PosTag::Adj, {}});
        for (const auto& verb : scene.verbs) world.lexicon.add({verb, PosTag::Verb, {}});
    }
    for (const char* det : {"a", "the", "and"}) world.lexicon.add({det, PosTag::Other, {}});
    for (const char* prep : kPrepositions) world.lexicon.add({prep, PosTag::Other, {}});

    // feature columns: objects first (scene-major), then scene nouns, adjectives, verbs
    for (const auto& scene : world.scenes) {
        for (const auto& obj : scene.objects) world.word_label_inventory.push_back(obj);
    }
    for (const auto& scene : world.scenes) world.word_label_inventory.push_back(scene.name);
    for (const auto& scene : world.scenes) {
        for (const auto& adj : scene.adjectives) world.word_label_inventory.push_back(adj);
    }
    for (const auto& scene : world.scenes) {
        for (const auto& verb : scene.verbs) world.word_label_inventory.push_back(verb);
    }

    // graph: hub links both ways, then extra same-scene pairs both ways
    for (const auto& scene : world.scenes) {
        world.graph.entities.push_back(scene.entity);
        for (const auto& obj : scene.objects) world.graph.entities.push_back(entity_id_for(obj));
    }
    for (const auto& scene : world.scenes) {
        for (const auto& obj : scene.objects) {
            world.graph.edges.push_back({entity_id_for(obj), "located_in", scene.entity});
            world.graph.edges.push_back({scene.entity, "contains", entity_id_for(obj)});
        }
    }
    Rng rng = Rng(seed).fork(1);
    std::set<std::pair<std::string, std::string>> used_pairs;
    std::size_t added = 0;
    std::size_t scene_cursor = 0;
    while (added < config.extra_edges) {
        const SceneSpec& scene = world.scenes[scene_cursor % world.scenes.size()];
        ++scene_cursor;
        const std::size_t n = scene.objects.size();
        if (used_pairs.size() >= pair_capacity) break;
        std::size_t a = rng.uniform_index(n);
        std::size_t b = rng.uniform_index(n - 1);
        if (b >= a) ++b;
        std::string ea = entity_id_for(scene.objects[std::min(a, b)]);
        std::string eb = entity_id_for(scene.objects[std::max(a, b)]);
        if (!used_pairs.emplace(ea, eb).second) continue;
        world.graph.edges.push_back({ea, "near", eb});
        world.graph.edges.push_back({eb, "near", ea});
        ++added;
    }
    return world;
}

// ---- dataset sampling ---------------------------------------------------

namespace {

struct CaptionDraw {
    std::size_t scene_index;
    std::vector<std::string> tokens;
};

std::vector<std::string> make_caption(const SceneSpec& scene, std::size_t tmpl,
                                      const std::string& obj1, const std::string& obj2,
                                      const std::string& adj, const std::string& verb,
                                      const std::string& prep) {
    switch (tmpl % 3) {
        case 0: return {"a", adj, obj1, verb, prep, "a", obj2};
        case 1: return {"the", obj1, verb, prep, "the", scene.name};
        default: return {"a", adj, obj1, "and", "a", obj2, verb, prep, "the", scene.name};
    }
}

// Scene-consistent caption with obj1 fixed; co-draws cycle deterministically
// per scene so every adjective/verb/preposition surfaces early in the corpus.
CaptionDraw draw_caption(const World& world, std::size_t scene_index, const std::string& obj1,
                         const std::vector<std::string>& obj2_candidates, std::size_t counter,
                         Rng& rng) {
    const SceneSpec& scene = world.scenes[scene_index];
    const std::string& adj = scene.adjectives[counter % scene.adjectives.size()];
    const std::string& verb = scene.verbs[(counter / scene.adjectives.size()) % scene.verbs.size()];
    const std::string& prep = kPrepositions[counter % kPrepositions.size()];
    std::string obj2 = obj2_candidates[rng.uniform_index(obj2_candidates.size())];
    return {scene_index, make_caption(scene, counter, obj1, obj2, adj, verb, prep)};
}

ImageRecord make_image(const World& world, const std::string& id,
                       const std::vector<std::string>& caption_tokens, Rng& rng) {
    ImageRecord image;
    image.id = id;
    std::set<std::string> content;
    for (const auto& tok : caption_tokens) {
        const LexiconEntry* entry = world.lexicon.find(tok);
        if (entry == nullptr) continue;
        if (entry->pos != PosTag::Other) content.insert(tok);
        if (!entry->entity_id.empty()) {
            auto& ea = image.gold_entity_labels;
            if (std::find(ea.begin(), ea.end(), entry->entity_id) == ea.end()) {
                ea.push_back(entry->entity_id);
            }
        }
    }
    image.gold_word_labels = content;
    image.features.resize(world.word_label_inventory.size());
    for (std::size_t i = 0; i < world.word_label_inventory.size(); ++i) {
        const bool gold = content.count(world.word_label_inventory[i]) > 0;
        image.features[i] = gold ? rng.uniform(0.7, 1.0) : rng.uniform(0.0, 0.3);
    }
    return image;
}

std::string image_id(const char* split, std::size_t n) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s-%05zu", split, n);
    return buf;
}

bool contains_any(const std::vector<std::string>& tokens, const std::set<std::string>& words) {
    for (const auto& t : tokens) {
        if (words.count(t)) return true;
    }
    return false;
}

}  // namespace

DatasetBundle sample_dataset(const World& world, std::uint64_t seed, const SampleSizes& sizes,
                             const std::vector<std::string>& heldout_words) {
    std::set<std::string> heldout(heldout_words.begin(), heldout_words.end());
    if (heldout.size() != heldout_words.size()) {
        throw InvalidArgument("duplicate held-out object word");
    }
    DatasetBundle bundle;
    for (const auto& word : heldout_words) {
        auto scene_index = world.scene_of_object(word);
        if (!scene_index) throw InvalidArgument("held-out word is not a world object: " + word);
        const auto& objs = world.scenes[*scene_index].objects;
        bool has_sibling = false;
        for (const auto& o : objs) {
            if (o != word && !heldout.count(o)) has_sibling = true;
        }
        if (!has_sibling) {
            throw InvalidArgument("held-out object has no non-held-out same-scene sibling: " +
                                  word);
        }
        bundle.heldout_objects.push_back({word, entity_id_for(word)});
    }
    std::sort(bundle.heldout_objects.begin(), bundle.heldout_objects.end(),
              [](const HeldoutObject& a, const HeldoutObject& b) { return a.word < b.word; });

    const std::vector<std::string> all_objects = world.all_objects();
    std::vector<std::vector<std::string>> seen_by_scene(world.scenes.size());
    for (std::size_t s = 0; s < world.scenes.size(); ++s) {
        for (const auto& o : world.scenes[s].objects) {
            if (!heldout.count(o)) seen_by_scene[s].push_back(o);
        }
        if (seen_by_scene[s].size() < 2 && sizes.train > 0) {
            throw InvalidArgument("scene " + world.scenes[s].name +
                                  " has fewer than 2 seen objects; cannot sample paired data");
        }
    }

    Rng base(seed);
    // unpaired text over every object, held-out included; round-robin on the
    // subject object guarantees coverage
    {
        Rng rng = base.fork(11);
        std::vector<std::size_t> scene_counters(world.scenes.size(), 0);
        for (std::size_t i = 0; i < sizes.unpaired; ++i) {
            const std::string& obj1 = all_objects[i % all_objects.size()];
            const std::size_t s = *world.scene_of_object(obj1);
            std::vector<std::string> candidates;
            for (const auto& o : world.scenes[s].objects) {
                if (o != obj1) candidates.push_back(o);
            }
            CaptionDraw draw = draw_caption(world, s, obj1, candidates, scene_counters[s]++, rng);
            bundle.unpaired_text.push_back(std::move(draw.tokens));
        }
    }

    auto sample_paired_seen = [&](Rng& rng, const char* split, std::size_t count,
                                  std::vector<PairedExample>& out) {
        std::vector<std::size_t> scene_counters(world.scenes.size(), 0);
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t s = rng.uniform_index(world.scenes.size());
            const auto& pool = seen_by_scene[s];
            const std::string& obj1 = pool[rng.uniform_index(pool.size())];
            std::vector<std::string> candidates;
            for (const auto& o : pool) {
                if (o != obj1) candidates.push_back(o);
            }
            CaptionDraw draw = draw_caption(world, s, obj1, candidates, scene_counters[s]++, rng);
            const std::string id = image_id(split, out.size());
            PairedExample ex;
            ex.image = make_image(world, id, draw.tokens, rng);
            ex.caption = {id, std::move(draw.tokens)};
            out.push_back(std::move(ex));
        }
    };

    {
        Rng rng = base.fork(12);
        sample_paired_seen(rng, "train", sizes.train, bundle.paired_train);
    }
    {
        Rng rng = base.fork(13);
        sample_paired_seen(rng, "val", sizes.val, bundle.paired_val);
    }

    // test: guaranteed mentions for each held-out object first, then a mixed
    // remainder over all objects
    {
        Rng rng = base.fork(14);
        std::vector<std::size_t> scene_counters(world.scenes.size(), 0);
        const std::size_t forced = sizes.min_test_mentions * bundle.heldout_objects.size();
        if (forced > sizes.test) {
            throw InvalidArgument("test split too small for requested held-out mentions");
        }
        auto push_test = [&](const std::string& obj1) {
            const std::size_t s = *world.scene_of_object(obj1);
            std::vector<std::string> candidates;
            for (const auto& o : world.scenes[s].objects) {
                if (o != obj1) candidates.push_back(o);
            }
            CaptionDraw draw =
                draw_caption(world, s, obj1, candidates, scene_counters[s]++, rng);
            const std::string id = image_id("test", bundle.paired_test.size());
            PairedExample ex;
            ex.image = make_image(world, id, draw.tokens, rng);
            ex.caption = {id, std::move(draw.tokens)};
            bundle.paired_test.push_back(std::move(ex));
        };
        for (const auto& ho : bundle.heldout_objects) {
            for (std::size_t i = 0; i < sizes.min_test_mentions; ++i) push_test(ho.word);
        }
        for (std::size_t i = forced; i < sizes.test; ++i) {
            push_test(all_objects[rng.uniform_index(all_objects.size())]);
        }
    }

    // protocol self-check; a failure here is a generator bug
    for (const auto& ex : bundle.paired_train) {
        if (contains_any(ex.caption.tokens, heldout)) {
            throw ContractViolation("generator emitted a held-out word in paired training");
        }
        for (const auto& ho : bundle.heldout_objects) {
            if (ex.image.gold_word_labels.count(ho.word) ||
                std::find(ex.image.gold_entity_labels.begin(), ex.image.gold_entity_labels.end(),
                          ho.entity_id) != ex.image.gold_entity_labels.end()) {
                throw ContractViolation("generator emitted a held-out label in paired training");
            }
        }
    }
    return bundle;
}

// ---- JSONL helpers ------------------------------------------------------

namespace {

json parse_line(const std::string& line, const std::filesystem::path& path, std::size_t line_no) {
    try {
        return json::parse(line);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
    }
}

void require_keys(const json& j, const std::vector<std::string>& keys,
                  const std::filesystem::path& path, std::size_t line_no) {
    if (!j.is_object()) {
        throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                         ": expected a JSON object");
    }
    for (const auto& item : j.items()) {
        if (std::find(keys.begin(), keys.end(), item.key()) == keys.end()) {
            throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                             ": unknown field \"" + item.key() + "\"");
        }
    }
    for (const auto& key : keys) {
        if (!j.contains(key)) {
            throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                             ": missing field \"" + key + "\"");
        }
    }
}

std::vector<std::string> string_list(const json& j) { return j.get<std::vector<std::string>>(); }

json image_to_json(const ImageRecord& image) {
    return json{{"id", image.id},
                {"features", image.features},
                {"word_labels", std::vector<std::string>(image.gold_word_labels.begin(),
                                                         image.gold_word_labels.end())},
                {"entity_labels", image.gold_entity_labels}};
}

ImageRecord image_from_json(const json& j, const std::filesystem::path& path,
                            std::size_t line_no) {
    require_keys(j, {"id", "features", "word_labels", "entity_labels"}, path, line_no);
    ImageRecord image;
    image.id = j.at("id").get<std::string>();
    image.features = j.at("features").get<std::vector<double>>();
    auto words = string_list(j.at("word_labels"));
    image.gold_word_labels.insert(words.begin(), words.end());
    image.gold_entity_labels = string_list(j.at("entity_labels"));
    return image;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    for (const auto& row : rows) out << row.dump() << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<json> read_jsonl(const std::filesystem::path& path,
                             const std::vector<std::string>& keys) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    std::vector<json> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            throw ParseError(path.string() + ": line " + std::to_string(line_no) + ": empty line");
        }
        json j = parse_line(line, path, line_no);
        require_keys(j, keys, path, line_no);
        rows.push_back(std::move(j));
    }
    return rows;
}

std::vector<PairedExample> read_paired(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    std::vector<PairedExample> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        json j = parse_line(line, path, line_no);
        require_keys(j, {"image", "caption"}, path, line_no);
        PairedExample ex;
        ex.image = image_from_json(j.at("image"), path, line_no);
        const json& cap = j.at("caption");
        require_keys(cap, {"image_id", "tokens"}, path, line_no);
        ex.caption.image_id = cap.at("image_id").get<std::string>();
        ex.caption.tokens = string_list(cap.at("tokens"));
        out.push_back(std::move(ex));
    }
    return out;
}

void write_paired(const std::filesystem::path& path, const std::vector<PairedExample>& rows) {
    std::vector<json> out;
    out.reserve(rows.size());
    for (const auto& ex : rows) {
        out.push_back(json{{"image", image_to_json(ex.image)},
                           {"caption", json{{"image_id", ex.caption.image_id},
                                            {"tokens", ex.caption.tokens}}}});
    }
    write_jsonl(path, out);
}

}  // namespace

void write_world(const World& world, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json scenes = json::array();
    for (const auto& s : world.scenes) {
        scenes.push_back(json{{"name", s.name},
                              {"entity", s.entity},
                              {"objects", s.objects},
                              {"adjectives", s.adjectives},
                              {"verbs", s.verbs}});
    }
    json head{{"format", "KGAWLD1"},
              {"seed", world.seed},
              {"config",
               json{{"objects", world.config.objects},
                    {"scenes", world.config.scenes},
                    {"adjectives_per_scene", world.config.adjectives_per_scene},
                    {"verbs_per_scene", world.config.verbs_per_scene},
                    {"extra_edges", world.config.extra_edges},
                    {"embedding_dim", world.config.embedding_dim}}},
              {"scenes", scenes},
              {"word_label_inventory", world.word_label_inventory}};
    std::ofstream out(dir / "world.json");
    if (!out) throw IoError("cannot open for writing: " + (dir / "world.json").string());
    out << head.dump(2) << '\n';

    std::vector<json> lex;
    for (const auto& e : world.lexicon.entries()) {
        lex.push_back(json{{"surface", e.surface},
                           {"pos", pos_tag_name(e.pos)},
                           {"entity", e.entity_id.empty() ? json() : json(e.entity_id)}});
    }
    write_jsonl(dir / "lexicon.jsonl", lex);

    std::vector<json> graph;
    for (const auto& ent : world.graph.entities) {
        graph.push_back(json{{"kind", "entity"}, {"id", ent}});
    }
    for (const auto& e : world.graph.edges) {
        graph.push_back(json{{"kind", "edge"},
                             {"subject", e.subject},
                             {"relation", e.relation},
                             {"object", e.object}});
    }
    write_jsonl(dir / "graph.jsonl", graph);
}

World read_world(const std::filesystem::path& dir) {
    std::ifstream in(dir / "world.json");
    if (!in) throw IoError("cannot open for reading: " + (dir / "world.json").string());
    json head;
    try {
        head = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError((dir / "world.json").string() + ": " + e.what());
    }
    require_keys(head, {"format", "seed", "config", "scenes", "word_label_inventory"},
                 dir / "world.json", 1);
    if (head.at("format") != "KGAWLD1") {
        throw ParseError((dir / "world.json").string() + ": bad format marker");
    }
    World world;
    world.seed = head.at("seed").get<std::uint64_t>();
    const json& cfg = head.at("config");
    require_keys(cfg,
                 {"objects", "scenes", "adjectives_per_scene", "verbs_per_scene", "extra_edges",
                  "embedding_dim"},
                 dir / "world.json", 1);
    world.config.objects = cfg.at("objects").get<std::size_t>();
    world.config.scenes = cfg.at("scenes").get<std::size_t>();
    world.config.adjectives_per_scene = cfg.at("adjectives_per_scene").get<std::size_t>();
    world.config.verbs_per_scene = cfg.at("verbs_per_scene").get<std::size_t>();
    world.config.extra_edges = cfg.at("extra_edges").get<std::size_t>();
    world.config.embedding_dim = cfg.at("embedding_dim").get<std::size_t>();
    for (const auto& s : head.at("scenes")) {
        require_keys(s, {"name", "entity", "objects", "adjectives", "verbs"}, dir / "world.json",
                     1);
        SceneSpec scene;
        scene.name = s.at("name").get<std::string>();
        scene.entity = s.at("entity").get<std::string>();
        scene.objects = string_list(s.at("objects"));
        scene.adjectives = string_list(s.at("adjectives"));
        scene.verbs = string_list(s.at("verbs"));
        world.scenes.push_back(std::move(scene));
    }
    world.word_label_inventory = string_list(head.at("word_label_inventory"));

    for (const auto& row : read_jsonl(dir / "lexicon.jsonl", {"surface", "pos", "entity"})) {
        LexiconEntry entry;
        entry.surface = row.at("surface").get<std::string>();
        entry.pos = pos_tag_from_name(row.at("pos").get<std::string>());
        if (!row.at("entity").is_null()) entry.entity_id = row.at("entity").get<std::string>();
        world.lexicon.add(std::move(entry));
    }

    std::ifstream gin(dir / "graph.jsonl");
    if (!gin) throw IoError("cannot open for reading: " + (dir / "graph.jsonl").string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(gin, line)) {
        ++line_no;
        json j = parse_line(line, dir / "graph.jsonl", line_no);
        if (!j.contains("kind")) {
            throw ParseError((dir / "graph.jsonl").string() + ": line " +
                             std::to_string(line_no) + ": missing field \"kind\"");
        }
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "entity") {
            require_keys(j, {"kind", "id"}, dir / "graph.jsonl", line_no);
            world.graph.entities.push_back(j.at("id").get<std::string>());
        } else if (kind == "edge") {
            require_keys(j, {"kind", "subject", "relation", "object"}, dir / "graph.jsonl",
                         line_no);
            world.graph.edges.push_back({j.at("subject").get<std::string>(),
                                         j.at("relation").get<std::string>(),
                                         j.at("object").get<std::string>()});
        } else {
            throw ParseError((dir / "graph.jsonl").string() + ": line " +
                             std::to_string(line_no) + ": unknown kind \"" + kind + "\"");
        }
    }
    return world;
}

void write_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir,
                  const BundleManifest& manifest) {
    std::filesystem::create_directories(dir);
    json heldout = json::array();
    for (const auto& ho : bundle.heldout_objects) {
        heldout.push_back(json{{"word", ho.word}, {"entity", ho.entity_id}});
    }
    json m{{"format", "KGAB1"},
           {"seed", manifest.seed},
           {"config_hash", manifest.config_hash},
           {"heldout", heldout},
           {"files", json{{"unpaired", "unpaired.jsonl"},
                          {"train", "paired_train.jsonl"},
                          {"val", "paired_val.jsonl"},
                          {"test", "paired_test.jsonl"}}}};
    std::ofstream out(dir / "manifest.json");
    if (!out) throw IoError("cannot open for writing: " + (dir / "manifest.json").string());
    out << m.dump(2) << '\n';

    std::vector<json> unpaired;
    unpaired.reserve(bundle.unpaired_text.size());
    for (const auto& tokens : bundle.unpaired_text) unpaired.push_back(json{{"tokens", tokens}});
    write_jsonl(dir / "unpaired.jsonl", unpaired);
    write_paired(dir / "paired_train.jsonl", bundle.paired_train);
    write_paired(dir / "paired_val.jsonl", bundle.paired_val);
    write_paired(dir / "paired_test.jsonl", bundle.paired_test);
}

DatasetBundle read_bundle(const std::filesystem::path& dir, BundleManifest* manifest) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw IoError("cannot open for reading: " + (dir / "manifest.json").string());
    json m;
    try {
        m = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError((dir / "manifest.json").string() + ": " + e.what());
    }
    require_keys(m, {"format", "seed", "config_hash", "heldout", "files"}, dir / "manifest.json",
                 1);
    if (m.at("format") != "KGAB1") {
        throw ParseError((dir / "manifest.json").string() + ": bad format marker");
    }
    if (manifest != nullptr) {
        manifest->seed = m.at("seed").get<std::uint64_t>();
        manifest->config_hash = m.at("config_hash").get<std::string>();
    }
    DatasetBundle bundle;
    for (const auto& ho : m.at("heldout")) {
        require_keys(ho, {"word", "entity"}, dir / "manifest.json", 1);
        bundle.heldout_objects.push_back(
            {ho.at("word").get<std::string>(), ho.at("entity").get<std::string>()});
    }
    const json& files = m.at("files");
    require_keys(files, {"unpaired", "train", "val", "test"}, dir / "manifest.json", 1);
    for (const auto& row :
         read_jsonl(dir / files.at("unpaired").get<std::string>(), {"tokens"})) {
        bundle.unpaired_text.push_back(string_list(row.at("tokens")));
    }
    bundle.paired_train = read_paired(dir / files.at("train").get<std::string>());
    bundle.paired_val = read_paired(dir / files.at("val").get<std::string>());
    bundle.paired_test = read_paired(dir / files.at("test").get<std::string>());
    return bundle;
}

// ---- vocabulary ----------------------------------------------------------

Vocabulary Vocabulary::build(const DatasetBundle& bundle) {
    std::set<std::string> words;
    for (const auto& sentence : bundle.unpaired_text) words.insert(sentence.begin(), sentence.end());
    for (const auto& ex : bundle.paired_train) {
        words.insert(ex.caption.tokens.begin(), ex.caption.tokens.end());
    }
    if (words.count(bos_token()) || words.count(eos_token())) {
        throw InvalidArgument("corpus tokens collide with the reserved BOS/EOS markers");
    }
    Vocabulary vocab;
    vocab.tokens_.push_back(bos_token());
    vocab.tokens_.push_back(eos_token());
    vocab.tokens_.insert(vocab.tokens_.end(), words.begin(), words.end());
    vocab.unseen_.assign(vocab.tokens_.size(), false);
    for (std::size_t i = 0; i < vocab.tokens_.size(); ++i) vocab.index_[vocab.tokens_[i]] = i;
    for (const auto& ho : bundle.heldout_objects) {
        if (vocab.index_.count(ho.word)) vocab.unseen_[vocab.index_[ho.word]] = true;
    }
    return vocab;
}

const std::string& Vocabulary::token(std::size_t index) const {
    if (index >= tokens_.size()) throw NotFound("vocabulary index out of range");
    return tokens_[index];
}

std::size_t Vocabulary::index_of(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) throw NotFound("token not in vocabulary: " + token);
    return it->second;
}

bool Vocabulary::has(const std::string& token) const { return index_.count(token) > 0; }

bool Vocabulary::is_unseen_object(std::size_t index) const {
    if (index >= unseen_.size()) throw NotFound("vocabulary index out of range");
    return unseen_[index];
}

void Vocabulary::mark_unseen(const std::string& token) { unseen_[index_of(token)] = true; }

void Vocabulary::write(const std::filesystem::path& path) const {
    std::vector<json> rows;
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        rows.push_back(json{{"token", tokens_[i]}, {"index", i}, {"unseen", bool(unseen_[i])}});
    }
    write_jsonl(path, rows);
}

Vocabulary Vocabulary::read(const std::filesystem::path& path) {
    Vocabulary vocab;
    for (const auto& row : read_jsonl(path, {"token", "index", "unseen"})) {
        const std::size_t index = row.at("index").get<std::size_t>();
        if (index != vocab.tokens_.size()) {
            throw ParseError(path.string() + ": vocabulary indexes must be dense and ordered");
        }
        vocab.tokens_.push_back(row.at("token").get<std::string>());
        vocab.unseen_.push_back(row.at("unseen").get<bool>());
    }
    if (vocab.tokens_.size() < 2 || vocab.tokens_[0] != bos_token() ||
        vocab.tokens_[1] != eos_token()) {
        throw ParseError(path.string() + ": vocabulary must start with BOS and EOS");
    }
    for (std::size_t i = 0; i < vocab.tokens_.size(); ++i) vocab.index_[vocab.tokens_[i]] = i;
    return vocab;
}

}  // namespace kga
