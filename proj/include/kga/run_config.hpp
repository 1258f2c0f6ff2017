#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace kga {

// Flat key-value run configuration. Keys are registered up front; unknown
// keys are rejected so typos fail loudly. Every run logs the hash of the
// resolved configuration.
class RunConfig {
  public:
    // built-in defaults (the `desk` profile)
    RunConfig();

    // `desk` or `paper-defaults`
    static RunConfig profile(const std::string& name);

    void load_file(const std::filesystem::path& path);         // JSON object
    void set(const std::string& key, const std::string& value);  // flags win

    const std::string& str(const std::string& key) const;
    std::uint64_t u64(const std::string& key) const;
    double f64(const std::string& key) const;
    bool flag(const std::string& key) const;
    std::vector<std::string> list(const std::string& key) const;  // comma-separated

    // FNV-1a over the sorted key=value lines
    std::string hash() const;
    std::string dump() const;

    static const std::vector<std::string>& known_keys();

  private:
    std::map<std::string, std::string> values_;
};

}  // namespace kga
