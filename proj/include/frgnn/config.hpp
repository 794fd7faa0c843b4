#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "frgnn/error.hpp"
#include "frgnn/params.hpp"

namespace frgnn {

/// Shortest round-trip decimal text of a double.
inline std::string format_real(double v) {
    char buf[32];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::stod(buf) == v) break;
    }
    return buf;
}

/// Fixed-precision text for reports.
inline std::string format_fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

/// Flat `key = value` configuration. `[section]` lines prefix the keys that
/// follow with `section.`; `#` and `;` start comments. Every typed lookup
/// records the effective value (explicit or default) so the resolved settings
/// can be written into a run manifest.
class Config {
public:
    Config() = default;

    static Config parse(const std::string& text, const std::string& origin = "<config>") {
        Config cfg;
        std::istringstream in(text);
        std::string line;
        std::string section;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto cut = line.find_first_of("#;");
            if (cut != std::string::npos) line.erase(cut);
            line = trim(line);
            if (line.empty()) continue;
            const std::string where = origin + ":" + std::to_string(lineno);
            if (line.front() == '[') {
                if (line.back() != ']') throw ConfigError(where + ": unterminated section header");
                section = trim(line.substr(1, line.size() - 2));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
            std::string key = trim(line.substr(0, eq));
            if (key.empty()) throw ConfigError(where + ": empty key");
            if (!section.empty()) key = section + "." + key;
            if (cfg.values_.count(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
            cfg.values_[key] = trim(line.substr(eq + 1));
        }
        return cfg;
    }

    static Config load(const std::filesystem::path& path) {
        if (!std::filesystem::is_regular_file(path)) throw ConfigError("config file not found: " + path.string());
        Config cfg = parse(detail::read_file(path), path.string());
        cfg.base_dir_ = path.parent_path();
        return cfg;
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    const std::filesystem::path& base_dir() const { return base_dir_; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        const std::string v = raw(key, fallback);
        resolved_[key] = v;
        return v;
    }

    /// Path values are resolved against the config file's directory.
    std::filesystem::path get_path(const std::string& key, const std::string& fallback) const {
        const std::filesystem::path p = get_string(key, fallback);
        if (p.empty() || p.is_absolute()) return p;
        return base_dir_ / p;
    }

    double get_real(const std::string& key, double fallback) const {
        const std::string v = raw(key, format_real(fallback));
        double out = 0.0;
        try {
            std::size_t used = 0;
            out = std::stod(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
        }
        resolved_[key] = format_real(out);
        return out;
    }

    std::uint64_t get_count(const std::string& key, std::uint64_t fallback) const {
        const std::string v = raw(key, std::to_string(fallback));
        const std::uint64_t out = parse_count(key, v);
        resolved_[key] = std::to_string(out);
        return out;
    }

    bool get_bool(const std::string& key, bool fallback) const {
        const std::string v = raw(key, fallback ? "true" : "false");
        bool out = false;
        if (v == "true" || v == "1" || v == "yes") out = true;
        else if (v == "false" || v == "0" || v == "no") out = false;
        else throw ConfigError("config key '" + key + "': '" + v + "' is not a boolean");
        resolved_[key] = out ? "true" : "false";
        return out;
    }

    /// Comma-separated counts; `a..b` expands to the inclusive range.
    std::vector<std::uint64_t> get_counts(const std::string& key, const std::string& fallback) const {
        const std::string v = raw(key, fallback);
        std::vector<std::uint64_t> out;
        for (const std::string& item : split_list(v)) {
            const auto dots = item.find("..");
            if (dots == std::string::npos) {
                out.push_back(parse_count(key, item));
                continue;
            }
            const std::uint64_t lo = parse_count(key, trim(item.substr(0, dots)));
            const std::uint64_t hi = parse_count(key, trim(item.substr(dots + 2)));
            if (hi < lo) throw ConfigError("config key '" + key + "': empty range '" + item + "'");
            for (std::uint64_t k = lo; k <= hi; ++k) out.push_back(k);
        }
        resolved_[key] = v;
        return out;
    }

    std::vector<double> get_reals(const std::string& key, const std::string& fallback) const {
        const std::string v = raw(key, fallback);
        std::vector<double> out;
        for (const std::string& item : split_list(v)) {
            try {
                std::size_t used = 0;
                out.push_back(std::stod(item, &used));
                if (used != item.size()) throw std::invalid_argument(item);
            } catch (const std::exception&) {
                throw ConfigError("config key '" + key + "': '" + item + "' is not a number");
            }
        }
        resolved_[key] = v;
        return out;
    }

    std::vector<std::string> get_strings(const std::string& key, const std::string& fallback) const {
        const std::string v = raw(key, fallback);
        resolved_[key] = v;
        return split_list(v);
    }

    /// Keys present in the file that no lookup has consumed.
    std::vector<std::string> unused_keys() const {
        std::vector<std::string> out;
        for (const auto& [k, v] : values_)
            if (!resolved_.count(k)) out.push_back(k);
        return out;
    }

    const std::map<std::string, std::string>& resolved() const { return resolved_; }

private:
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    static std::vector<std::string> split_list(const std::string& v) {
        std::vector<std::string> out;
        std::istringstream in(v);
        std::string item;
        while (std::getline(in, item, ',')) {
            item = trim(item);
            if (!item.empty()) out.push_back(item);
        }
        return out;
    }

    static std::uint64_t parse_count(const std::string& key, const std::string& v) {
        try {
            std::size_t used = 0;
            if (v.empty() || v[0] == '-') throw std::invalid_argument(v);
            const auto out = std::stoull(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return out;
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "': '" + v + "' is not a non-negative integer");
        }
    }

    std::string raw(const std::string& key, const std::string& fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    std::map<std::string, std::string> values_;
    mutable std::map<std::string, std::string> resolved_;
    std::filesystem::path base_dir_;
};

} // namespace frgnn
