// Copyright (c) 2026 The dmlmc authors
// SPDX-License-Identifier: Apache-2.0

#include "dmlmc/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dmlmc/errors.hpp"

namespace dmlmc {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<double> parse_double_list(const std::string& text) {
    std::string cleaned = text;
    for (char& c : cleaned) {
        if (c == ',') c = ' ';
    }
    std::istringstream is(cleaned);
    std::vector<double> out;
    std::string tok;
    while (is >> tok) {
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0') {
            throw ConfigError("malformed number '" + tok + "'");
        }
        out.push_back(v);
    }
    return out;
}

ConfigFile ConfigFile::parse(const std::string& text) {
    ConfigFile cfg;
    cfg.raw_ = text;
    std::istringstream is(text);
    std::string line;
    Section* current = nullptr;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": unterminated section header");
            }
            const std::string header = trim(line.substr(1, line.size() - 2));
            Section s;
            const auto space = header.find(' ');
            if (space == std::string::npos) {
                s.kind = header;
            } else {
                s.kind = header.substr(0, space);
                s.label = trim(header.substr(space + 1));
            }
            cfg.sections_.push_back(std::move(s));
            current = &cfg.sections_.back();
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected key = value");
        }
        if (!current) {
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": key outside any [section]");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        }
        current->entries[key] = value;
    }
    return cfg;
}

ConfigFile ConfigFile::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse(ss.str());
}

const ConfigFile::Section* ConfigFile::find(const std::string& kind,
                                            const std::string& label) const {
    for (const auto& s : sections_) {
        if (s.kind == kind && (label.empty() || s.label == label)) return &s;
    }
    return nullptr;
}

std::uint64_t ConfigFile::hash() const {
    // FNV-1a
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : raw_) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string ConfigFile::get_string(const Section& s, const std::string& key) {
    const auto it = s.entries.find(key);
    if (it == s.entries.end()) {
        throw ConfigError("missing key '" + key + "' in section [" + s.kind +
                          (s.label.empty() ? "" : " " + s.label) + "]");
    }
    return it->second;
}

std::string ConfigFile::get_string(const Section& s, const std::string& key,
                                   const std::string& fallback) {
    const auto it = s.entries.find(key);
    return it == s.entries.end() ? fallback : it->second;
}

double ConfigFile::get_double(const Section& s, const std::string& key) {
    const auto list = parse_double_list(get_string(s, key));
    if (list.size() != 1) throw ConfigError("key '" + key + "' must be one number");
    return list[0];
}

double ConfigFile::get_double(const Section& s, const std::string& key,
                              double fallback) {
    return s.entries.count(key) ? get_double(s, key) : fallback;
}

std::int64_t ConfigFile::get_int(const Section& s, const std::string& key) {
    const double v = get_double(s, key);
    const auto i = static_cast<std::int64_t>(v);
    if (static_cast<double>(i) != v) {
        throw ConfigError("key '" + key + "' must be an integer");
    }
    return i;
}

std::int64_t ConfigFile::get_int(const Section& s, const std::string& key,
                                 std::int64_t fallback) {
    return s.entries.count(key) ? get_int(s, key) : fallback;
}

bool ConfigFile::get_bool(const Section& s, const std::string& key, bool fallback) {
    const auto it = s.entries.find(key);
    if (it == s.entries.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("key '" + key + "' must be a boolean");
}

std::vector<double> ConfigFile::get_doubles(const Section& s, const std::string& key) {
    return parse_double_list(get_string(s, key));
}

std::optional<std::string> ConfigFile::maybe(const Section& s, const std::string& key) {
    const auto it = s.entries.find(key);
    if (it == s.entries.end()) return std::nullopt;
    return it->second;
}

}  // namespace dmlmc
