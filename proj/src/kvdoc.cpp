#include "greenmeter/kvdoc.hpp"

#include "greenmeter/error.hpp"

#include <charconv>
#include <cmath>

namespace greenmeter {

std::string format_real(double value)
{
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
    if (ec != std::errc{}) {
        throw Error(Errc::data, "cannot render real value");
    }
    return std::string(buf, end);
}

std::optional<double> parse_real(std::string_view token)
{
    if (token.empty()) {
        return std::nullopt;
    }
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || ptr != token.data() + token.size() || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

std::optional<std::int64_t> parse_int(std::string_view token)
{
    if (token.empty()) {
        return std::nullopt;
    }
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || ptr != token.data() + token.size()) {
        return std::nullopt;
    }
    return value;
}

std::vector<std::string_view> split_lines(std::string_view text)
{
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            lines.push_back(text.substr(pos));
            break;
        }
        lines.push_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    return lines;
}

std::vector<std::string_view> split(std::string_view text, char delim)
{
    std::vector<std::string_view> parts;
    std::size_t pos = 0;
    for (;;) {
        auto at = text.find(delim, pos);
        if (at == std::string_view::npos) {
            parts.push_back(text.substr(pos));
            return parts;
        }
        parts.push_back(text.substr(pos, at - pos));
        pos = at + 1;
    }
}

KvDoc KvDoc::parse(std::string_view text)
{
    KvDoc doc;
    auto lines = split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        auto line = lines[i];
        auto eq = line.find('=');
        if (eq == std::string_view::npos || eq == 0) {
            throw Error(Errc::format, i + 1, "expected key=value");
        }
        std::string key(line.substr(0, eq));
        if (!doc.entries_.emplace(key, std::string(line.substr(eq + 1))).second) {
            throw Error(Errc::duplicate, i + 1, "repeated key '" + key + "'");
        }
    }
    return doc;
}

std::string KvDoc::render() const
{
    std::string out;
    for (const auto& [key, value] : entries_) {
        out += key;
        out += '=';
        out += value;
        out += '\n';
    }
    return out;
}

void KvDoc::set(const std::string& key, std::string value)
{
    if (value.find('\n') != std::string::npos) {
        throw Error(Errc::data, "value for '" + key + "' contains a newline");
    }
    entries_[key] = std::move(value);
}

void KvDoc::set(const std::string& key, double value) { set(key, format_real(value)); }

void KvDoc::set_int(const std::string& key, std::int64_t value) { set(key, std::to_string(value)); }

bool KvDoc::contains(const std::string& key) const { return entries_.count(key) != 0; }

const std::string& KvDoc::get(const std::string& key) const
{
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        throw Error(Errc::format, "missing key '" + key + "'");
    }
    return it->second;
}

double KvDoc::get_real(const std::string& key) const
{
    auto value = parse_real(get(key));
    if (!value) {
        throw Error(Errc::format, "key '" + key + "' is not a finite real");
    }
    return *value;
}

std::int64_t KvDoc::get_int(const std::string& key) const
{
    auto value = parse_int(get(key));
    if (!value) {
        throw Error(Errc::format, "key '" + key + "' is not an integer");
    }
    return *value;
}

} // namespace greenmeter
