#include "kga/run_config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kga/errors.hpp"

namespace kga {

using nlohmann::json;

namespace {

const std::vector<std::pair<const char*, const char*>>& defaults() {
    static const std::vector<std::pair<const char*, const char*>> kDefaults = {
        {"world.objects", "12"},
        {"world.scenes", "3"},
        {"world.adjectives", "3"},
        {"world.verbs", "3"},
        {"world.extra_edges", "6"},
        {"data.seed", "7"},
        {"data.unpaired", "3000"},
        {"data.train", "2000"},
        {"data.val", "200"},
        {"data.test", "200"},
        {"data.min_test_mentions", "20"},
        {"data.heldout", ""},  // comma list; empty picks the first object of two scenes
        {"dims.word", "16"},
        {"dims.entity", "16"},
        {"dims.hidden1", "32"},
        {"dims.hidden2", "32"},
        {"walks.per_entity", "8"},
        {"walks.depth", "4"},
        {"walks.seed", "1"},
        {"sg.window", "3"},
        {"sg.negatives", "5"},
        {"sg.epochs", "12"},
        {"sg.lr", "0.05"},
        {"sg.seed", "1"},
        {"lm.epochs", "10"},
        {"lm.batch", "16"},
        {"lm.lr", "0.003"},
        {"lm.clip", "1.0"},
        {"lm.seed", "1"},
        {"cgm.epochs", "6"},
        {"cgm.batch", "16"},
        {"cgm.lr", "0.005"},
        {"cgm.clip", "1.0"},
        {"cgm.seed", "1"},
        {"cgm.esa", "true"},
        {"gen.beam", "1"},
        {"gen.max_len", "12"},
        {"gen.ci", "true"},
        {"gen.recompute_trigger", "true"},
        {"transfer.copy_textual", "true"},
        {"transfer.remap_self", "true"},
        {"ablate.seeds", "1,2,3"},
        {"ablate.beams", "1,3"},
        {"sweep.pairs", "16x16,16x32,32x32"},
        {"features.classifier", "false"},
        {"classifier.epochs", "40"},
        {"classifier.lr", "0.05"},
        {"classifier.seed", "1"},
    };
    return kDefaults;
}

}  // namespace

RunConfig::RunConfig() {
    for (const auto& [key, value] : defaults()) values_[key] = value;
}

RunConfig RunConfig::profile(const std::string& name) {
    RunConfig config;
    if (name == "desk") return config;
    if (name == "paper-defaults") {
        // published hyperparameters: 256-d word vectors, 512-d hidden layers,
        // 500-d entity vectors, clip 1.0, 15 epochs from the 15..50 range
        config.set("dims.word", "256");
        config.set("dims.hidden1", "512");
        config.set("dims.hidden2", "512");
        config.set("dims.entity", "500");
        config.set("lm.epochs", "15");
        config.set("cgm.epochs", "15");
        config.set("lm.clip", "1.0");
        config.set("cgm.clip", "1.0");
        return config;
    }
    throw InvalidArgument("unknown profile: " + name + " (expected desk or paper-defaults)");
}

const std::vector<std::string>& RunConfig::known_keys() {
    static const std::vector<std::string> kKeys = [] {
        std::vector<std::string> keys;
        for (const auto& [key, value] : defaults()) {
            (void)value;
            keys.push_back(key);
        }
        return keys;
    }();
    return kKeys;
}

void RunConfig::load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    if (!j.is_object()) throw ParseError(path.string() + ": config must be a JSON object");
    for (const auto& item : j.items()) {
        std::string value;
        if (item.value().is_string()) {
            value = item.value().get<std::string>();
        } else {
            value = item.value().dump();
        }
        set(item.key(), value);
    }
}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (!values_.count(key)) throw InvalidArgument("unknown config key: " + key);
    values_[key] = value;
}

const std::string& RunConfig::str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw InvalidArgument("unknown config key: " + key);
    return it->second;
}

std::uint64_t RunConfig::u64(const std::string& key) const {
    const std::string& v = str(key);
    try {
        std::size_t pos = 0;
        const std::uint64_t out = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw InvalidArgument("config key " + key + " is not an integer: " + v);
    }
}

double RunConfig::f64(const std::string& key) const {
    const std::string& v = str(key);
    try {
        std::size_t pos = 0;
        const double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw InvalidArgument("config key " + key + " is not a number: " + v);
    }
}

bool RunConfig::flag(const std::string& key) const {
    const std::string& v = str(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw InvalidArgument("config key " + key + " is not a boolean: " + v);
}

std::vector<std::string> RunConfig::list(const std::string& key) const {
    const std::string& v = str(key);
    std::vector<std::string> out;
    std::istringstream stream(v);
    std::string item;
    while (std::getline(stream, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string RunConfig::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ull;
        }
    };
    for (const auto& [key, value] : values_) {
        mix(key);
        mix("=");
        mix(value);
        mix("\n");
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string RunConfig::dump() const {
    std::string out;
    for (const auto& [key, value] : values_) {
        out += key;
        out += '=';
        out += value;
        out += '\n';
    }
    return out;
}

}  // namespace kga
