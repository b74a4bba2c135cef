#pragma once

// Textual key:value config files plus command-line overrides. Lines are
// "key: value" (or "key = value"); '#' starts a comment. Repeated keys are
// kept in order (scene target lists use this).

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "osp/error.hpp"

namespace osp::config {

struct KvFile {
    std::vector<std::pair<std::string, std::string>> entries;

    bool has(const std::string& key) const {
        for (const auto& [k, v] : entries)
            if (k == key) return true;
        return false;
    }

    std::string get_str(const std::string& key) const {
        for (const auto& [k, v] : entries)
            if (k == key) return v;
        contract_fail("cli", "config: missing key '" + key + "'");
    }

    std::string get_str(const std::string& key, const std::string& def) const {
        return has(key) ? get_str(key) : def;
    }

    double get_double(const std::string& key) const {
        try {
            return std::stod(get_str(key));
        } catch (const std::invalid_argument&) {
            contract_fail("cli", "config: key '" + key + "' is not a number");
        }
    }
    double get_double(const std::string& key, double def) const {
        return has(key) ? get_double(key) : def;
    }

    std::uint64_t get_u64(const std::string& key) const {
        try {
            return std::stoull(get_str(key));
        } catch (const std::invalid_argument&) {
            contract_fail("cli", "config: key '" + key + "' is not an integer");
        }
    }
    std::uint64_t get_u64(const std::string& key, std::uint64_t def) const {
        return has(key) ? get_u64(key) : def;
    }

    std::vector<std::string> get_all(const std::string& key) const {
        std::vector<std::string> out;
        for (const auto& [k, v] : entries)
            if (k == key) out.push_back(v);
        return out;
    }

    void set(const std::string& key, const std::string& val) {
        for (auto& [k, v] : entries) {
            if (k == key) {
                v = val;
                return;
            }
        }
        entries.emplace_back(key, val);
    }

    // Unknown keys are rejected so that typos fail loudly.
    void check_keys(const std::set<std::string>& known, const std::string& context) const {
        for (const auto& [k, v] : entries)
            require(known.count(k) != 0, "cli",
                    context + ": unknown config key '" + k + "'");
    }
};

inline std::pair<std::string, std::string> split_kv(const std::string& raw, char sep) {
    const auto pos = raw.find(sep);
    require(pos != std::string::npos, "cli", "config: malformed entry '" + raw + "'");
    auto trim = [](std::string s) {
        while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(s.begin());
        while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.pop_back();
        return s;
    };
    return {trim(raw.substr(0, pos)), trim(raw.substr(pos + 1))};
}

inline KvFile parse_kv_text(const std::string& text) {
    KvFile kv;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        bool blank = true;
        for (char c : line)
            if (c != ' ' && c != '\t' && c != '\r') blank = false;
        if (blank) continue;
        const char sep = (line.find(':') != std::string::npos) ? ':' : '=';
        kv.entries.push_back(split_kv(line, sep));
    }
    return kv;
}

inline KvFile load_kv(const std::string& path) {
    std::ifstream f(path);
    require(static_cast<bool>(f), "cli", "config: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_kv_text(ss.str());
}

// Overrides are "key=value" tokens from the command line.
inline void apply_overrides(KvFile& kv, const std::vector<std::string>& overrides) {
    for (const auto& o : overrides) {
        auto [k, v] = split_kv(o, '=');
        kv.set(k, v);
    }
}

}  // namespace osp::config
