#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "kga/rng.hpp"

namespace kga {

enum class PosTag { Noun, Verb, Adj, Other };

std::string pos_tag_name(PosTag tag);
PosTag pos_tag_from_name(const std::string& name);

struct LexiconEntry {
    std::string surface;
    PosTag pos = PosTag::Other;
    std::string entity_id;  // empty when the word has no knowledge-base entity
};

class Lexicon {
  public:
    void add(LexiconEntry entry);
    const LexiconEntry* find(const std::string& surface) const;
    const std::vector<LexiconEntry>& entries() const { return entries_; }

  private:
    std::vector<LexiconEntry> entries_;
    std::unordered_map<std::string, std::size_t> by_surface_;
};

struct GraphEdge {
    std::string subject;
    std::string relation;
    std::string object;

    bool operator==(const GraphEdge&) const = default;
};

struct KnowledgeGraph {
    std::vector<std::string> entities;  // declaration order
    std::vector<GraphEdge> edges;

    bool has_entity(const std::string& id) const;
    bool has_edge(const std::string& subject, const std::string& relation,
                  const std::string& object) const;
    // outgoing edges of an entity, in insertion order
    std::vector<const GraphEdge*> outgoing(const std::string& subject) const;
};

struct SceneSpec {
    std::string name;      // also the scene's NOUN surface
    std::string entity;    // knowledge-base id
    std::vector<std::string> objects;
    std::vector<std::string> adjectives;
    std::vector<std::string> verbs;
};

struct WorldConfig {
    std::size_t objects = 12;
    std::size_t scenes = 3;
    std::size_t adjectives_per_scene = 3;
    std::size_t verbs_per_scene = 3;
    std::size_t extra_edges = 6;      // same-scene object pairs beyond the hub links
    std::size_t embedding_dim = 16;   // recorded for downstream defaults
};

// A deterministic synthetic stand-in for a captioned-image corpus plus the
// knowledge base describing it. Objects cluster into scenes; captions are
// template phrases over scene-consistent words, so co-occurrence structure
// is real but enumerable.
struct World {
    WorldConfig config;
    std::uint64_t seed = 0;
    KnowledgeGraph graph;
    Lexicon lexicon;
    std::vector<SceneSpec> scenes;
    // NOUN/VERB/ADJ surfaces in feature-column order; image features index it
    std::vector<std::string> word_label_inventory;

    std::vector<std::string> all_objects() const;
    std::optional<std::size_t> scene_of_object(const std::string& object) const;
    std::optional<std::size_t> label_column(const std::string& word) const;
    // total directed edges the generator promises: 2*(objects + extra_edges)
    std::size_t declared_edge_count() const;
};

World build_world(std::uint64_t seed, const WorldConfig& config);

struct ImageRecord {
    std::string id;
    std::vector<double> features;              // one probability per inventory column
    std::set<std::string> gold_word_labels;
    std::vector<std::string> gold_entity_labels;  // first-mention order, no duplicates
};

struct CaptionRecord {
    std::string image_id;
    std::vector<std::string> tokens;  // no BOS/EOS; models add them

    bool operator==(const CaptionRecord&) const = default;
};

struct PairedExample {
    ImageRecord image;
    CaptionRecord caption;
};

struct HeldoutObject {
    std::string word;
    std::string entity_id;

    bool operator==(const HeldoutObject&) const = default;
};

struct DatasetBundle {
    std::vector<std::vector<std::string>> unpaired_text;
    std::vector<PairedExample> paired_train;
    std::vector<PairedExample> paired_val;
    std::vector<PairedExample> paired_test;
    std::vector<HeldoutObject> heldout_objects;
};

struct SampleSizes {
    std::size_t unpaired = 3000;
    std::size_t train = 2000;
    std::size_t val = 200;
    std::size_t test = 200;
    std::size_t min_test_mentions = 20;  // per held-out object
};

// Draws a dataset honouring the held-out protocol: held-out words never
// appear in paired training captions or labels, do appear in unpaired text,
// and each receives at least min_test_mentions test references.
DatasetBundle sample_dataset(const World& world, std::uint64_t seed, const SampleSizes& sizes,
                             const std::vector<std::string>& heldout_words);

// ---- serialization ----------------------------------------------------

void write_world(const World& world, const std::filesystem::path& dir);
World read_world(const std::filesystem::path& dir);

struct BundleManifest {
    std::uint64_t seed = 0;
    std::string config_hash;
};

void write_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir,
                  const BundleManifest& manifest);
DatasetBundle read_bundle(const std::filesystem::path& dir, BundleManifest* manifest = nullptr);

// ---- vocabulary --------------------------------------------------------

// Token <-> index map over paired-training plus unpaired text, BOS=0 and
// EOS=1 reserved, with per-word unseen-object flags.
class Vocabulary {
  public:
    static constexpr std::size_t kBos = 0;
    static constexpr std::size_t kEos = 1;
    static const char* bos_token() { return "<bos>"; }
    static const char* eos_token() { return "<eos>"; }

    static Vocabulary build(const DatasetBundle& bundle);

    std::size_t size() const { return tokens_.size(); }
    const std::string& token(std::size_t index) const;
    std::size_t index_of(const std::string& token) const;  // NotFound names the token
    bool has(const std::string& token) const;
    bool is_unseen_object(std::size_t index) const;
    void mark_unseen(const std::string& token);

    const std::vector<std::string>& tokens() const { return tokens_; }

    void write(const std::filesystem::path& path) const;
    static Vocabulary read(const std::filesystem::path& path);

  private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<bool> unseen_;
};

}  // namespace kga
