#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace greenmeter {

// Canonical real rendering: 17 significant digits, round-trips every double.
std::string format_real(double value);

// Strict numeric parsing of a whole token. Returns nullopt on any trailing
// garbage, empty input, or (for reals) a non-finite result.
std::optional<double> parse_real(std::string_view token);
std::optional<std::int64_t> parse_int(std::string_view token);

// Splits on '\n'. A single trailing newline does not produce an empty line.
std::vector<std::string_view> split_lines(std::string_view text);
std::vector<std::string_view> split(std::string_view text, char delim);

// Flat key-value document: one `key=value` per line, keys unique, ordered.
class KvDoc {
public:
    KvDoc() = default;

    static KvDoc parse(std::string_view text);
    std::string render() const;

    void set(const std::string& key, std::string value);
    void set(const std::string& key, double value);
    void set_int(const std::string& key, std::int64_t value);

    bool contains(const std::string& key) const;
    const std::string& get(const std::string& key) const;
    double get_real(const std::string& key) const;
    std::int64_t get_int(const std::string& key) const;

    const std::map<std::string, std::string>& entries() const { return entries_; }

private:
    std::map<std::string, std::string> entries_;
};

} // namespace greenmeter
