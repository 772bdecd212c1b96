#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace tjf {

/// Flat `key = value` text files: manifests, config files, checkpoint
/// sidecars. Lines starting with '#' and blank lines are ignored; keys are
/// written in insertion order so emitted files are deterministic.
class KvFile {
public:
    void set(const std::string& key, const std::string& value);
    void set(const std::string& key, double value);
    void set(const std::string& key, std::int64_t value);
    void set(const std::string& key, std::uint64_t value);
    void set(const std::string& key, bool value);

    bool has(const std::string& key) const;
    const std::string& get(const std::string& key) const;  // throws ConfigError if missing
    std::string get_or(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    std::int64_t get_int(const std::string& key) const;
    std::uint64_t get_uint(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

    void save(const std::filesystem::path& path) const;          // throws IoError
    static KvFile load(const std::filesystem::path& path);       // throws IoError/ParseError
    static KvFile parse(const std::string& text);

private:
    std::vector<std::pair<std::string, std::string>> entries_;
    std::map<std::string, std::size_t> index_;
};

/// Deterministic shortest round-trip formatting for doubles.
std::string format_double(double v);

}  // namespace tjf
