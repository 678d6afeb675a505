#include "ntklab/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace ntklab::config {

namespace {

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v)
{
    std::vector<std::string> out;
    if (trim(v).empty())
        return out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = v.find(',', start);
        out.push_back(trim(std::string_view(v).substr(start, comma - start)));
        if (comma == std::string::npos)
            break;
        start = comma + 1;
    }
    return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* type)
{
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as " + type);
}

template <class T>
T parse_number(const std::string& key, const std::string& s, const char* type)
{
    T v{};
    const char* first = s.data();
    const char* last = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last)
        bad_value(key, s, type);
    return v;
}

double parse_double(const std::string& key, const std::string& s)
{
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v))
        bad_value(key, s, "a number");
    return v;
}

} // namespace

std::string format_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Config Config::parse(std::istream& is)
{
    Config c;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        const std::string t = trim(line);
        if (t.empty())
            continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(std::string_view(t).substr(0, eq));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        c.entries_[key] = trim(std::string_view(t).substr(eq + 1));
    }
    return c;
}

Config Config::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file " + path.string());
    return parse(in);
}

void Config::set(const std::string& key, std::string value)
{
    entries_[key] = std::move(value);
}

void Config::set(const std::string& key, double value)
{
    entries_[key] = format_double(value);
}

void Config::set(const std::string& key, std::int64_t value)
{
    entries_[key] = std::to_string(value);
}

void Config::set(const std::string& key, std::uint64_t value)
{
    entries_[key] = std::to_string(value);
}

void Config::set(const std::string& key, bool value)
{
    entries_[key] = value ? "true" : "false";
}

void Config::set(const std::string& key, const std::vector<int>& values)
{
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i)
        s += (i ? "," : "") + std::to_string(values[i]);
    entries_[key] = s;
}

void Config::set(const std::string& key, const std::vector<double>& values)
{
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i)
        s += (i ? "," : "") + format_double(values[i]);
    entries_[key] = s;
}

void Config::set(const std::string& key, const std::vector<std::string>& values)
{
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i)
        s += (i ? "," : "") + values[i];
    entries_[key] = s;
}

bool Config::has(const std::string& key) const
{
    return entries_.count(key) != 0;
}

void Config::merge(const Config& other)
{
    for (const auto& [k, v] : other.entries_)
        entries_[k] = v;
}

const std::string* Config::find(const std::string& key) const
{
    const auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const
{
    const auto* v = find(key);
    return v ? *v : fallback;
}

double Config::get_double(const std::string& key, double fallback) const
{
    const auto* v = find(key);
    return v ? parse_double(key, *v) : fallback;
}

int Config::get_int(const std::string& key, int fallback) const
{
    const auto* v = find(key);
    return v ? parse_number<int>(key, *v, "an integer") : fallback;
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const
{
    const auto* v = find(key);
    return v ? parse_number<std::uint64_t>(key, *v, "an unsigned integer") : fallback;
}

bool Config::get_bool(const std::string& key, bool fallback) const
{
    const auto* v = find(key);
    if (!v)
        return fallback;
    if (*v == "true" || *v == "1" || *v == "yes")
        return true;
    if (*v == "false" || *v == "0" || *v == "no")
        return false;
    bad_value(key, *v, "a boolean");
}

std::vector<int> Config::get_int_list(const std::string& key, const std::vector<int>& fallback) const
{
    const auto* v = find(key);
    if (!v)
        return fallback;
    std::vector<int> out;
    for (const auto& item : split_list(*v))
        out.push_back(parse_number<int>(key, item, "an integer list"));
    return out;
}

std::vector<double> Config::get_double_list(const std::string& key, const std::vector<double>& fallback) const
{
    const auto* v = find(key);
    if (!v)
        return fallback;
    std::vector<double> out;
    for (const auto& item : split_list(*v))
        out.push_back(parse_double(key, item));
    return out;
}

std::vector<std::string> Config::get_string_list(const std::string& key,
                                                 const std::vector<std::string>& fallback) const
{
    const auto* v = find(key);
    return v ? split_list(*v) : fallback;
}

void Config::require_known(const std::set<std::string>& known) const
{
    for (const auto& [k, v] : entries_)
        if (!known.count(k))
            throw ConfigError("unknown config key '" + k + "'");
}

void Config::write(std::ostream& os) const
{
    for (const auto& [k, v] : entries_)
        os << k << " = " << v << '\n';
}

void Config::save(const std::filesystem::path& path) const
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    write(out);
}

} // namespace ntklab::config
