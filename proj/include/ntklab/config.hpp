#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ntklab::config {

/// Thrown for malformed files, unparsable values and unknown keys. The CLI
/// maps it to exit code 2.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Flat "key = value" store. '#' starts a comment; lists are comma
/// separated. Doubles are written with 17 significant digits so that a
/// write/parse cycle is lossless.
class Config {
public:
    static Config parse(std::istream& is);
    static Config load(const std::filesystem::path& path);

    void set(const std::string& key, std::string value);
    void set(const std::string& key, double value);
    void set(const std::string& key, std::int64_t value);
    void set(const std::string& key, int value) { set(key, static_cast<std::int64_t>(value)); }
    void set(const std::string& key, std::uint64_t value);
    void set(const std::string& key, bool value);
    void set(const std::string& key, const std::vector<int>& values);
    void set(const std::string& key, const std::vector<double>& values);
    void set(const std::string& key, const std::vector<std::string>& values);

    bool has(const std::string& key) const;
    /// Copies every entry of `other` over this one.
    void merge(const Config& other);

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;
    std::vector<double> get_double_list(const std::string& key, const std::vector<double>& fallback) const;
    std::vector<std::string> get_string_list(const std::string& key,
                                             const std::vector<std::string>& fallback) const;

    /// Throws ConfigError naming the first key not in `known`.
    void require_known(const std::set<std::string>& known) const;

    /// Sorted "key = value" lines.
    void write(std::ostream& os) const;
    void save(const std::filesystem::path& path) const;

    const std::map<std::string, std::string>& entries() const noexcept { return entries_; }

private:
    const std::string* find(const std::string& key) const;
    std::map<std::string, std::string> entries_;
};

/// %.17g formatting.
std::string format_double(double v);

} // namespace ntklab::config
