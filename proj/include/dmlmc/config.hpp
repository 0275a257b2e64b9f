// Copyright (c) 2026 The dmlmc authors
// SPDX-License-Identifier: Apache-2.0

#ifndef DMLMC_CONFIG_HPP
#define DMLMC_CONFIG_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dmlmc {

/// Flat key=value file with [section] headers. Section names may carry a
/// label ("[benchmark gauss-4d]"); '#' starts a comment; values are scalars
/// or whitespace/comma separated lists.
class ConfigFile {
public:
    struct Section {
        std::string kind;   // first word of the header
        std::string label;  // remainder, may be empty
        std::map<std::string, std::string> entries;
    };

    static ConfigFile parse(const std::string& text);
    static ConfigFile load(const std::string& path);

    const std::vector<Section>& sections() const { return sections_; }
    const Section* find(const std::string& kind, const std::string& label = "") const;

    /// Raw file bytes, kept for hashing into output headers.
    const std::string& raw() const { return raw_; }
    std::uint64_t hash() const;

    // Typed lookups on a section; throw ConfigError when missing/malformed
    // unless a default is given.
    static std::string get_string(const Section& s, const std::string& key);
    static std::string get_string(const Section& s, const std::string& key,
                                  const std::string& fallback);
    static double get_double(const Section& s, const std::string& key);
    static double get_double(const Section& s, const std::string& key, double fallback);
    static std::int64_t get_int(const Section& s, const std::string& key);
    static std::int64_t get_int(const Section& s, const std::string& key,
                                std::int64_t fallback);
    static bool get_bool(const Section& s, const std::string& key, bool fallback);
    static std::vector<double> get_doubles(const Section& s, const std::string& key);
    static std::optional<std::string> maybe(const Section& s, const std::string& key);

private:
    std::vector<Section> sections_;
    std::string raw_;
};

std::vector<double> parse_double_list(const std::string& text);

}  // namespace dmlmc

#endif  // DMLMC_CONFIG_HPP
