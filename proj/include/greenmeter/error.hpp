#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace greenmeter {

enum class Errc {
    out_of_order,
    invalid_range,
    configuration,
    format,
    duplicate,
    domain,
    invalid_marks,
    estimation,
    extraction,
    fit,
    data,
    usage,
    validation,
    size,
    conflict,
    storage,
    version,
};

std::string_view to_string(Errc code);

// Every failure in the library is reported as an Error. Parsers attach the
// 1-based line number of the offending input line.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message);
    Error(Errc code, std::size_t line, const std::string& message);

    Errc code() const noexcept { return code_; }
    std::optional<std::size_t> line() const noexcept { return line_; }

private:
    Errc code_;
    std::optional<std::size_t> line_;
};

} // namespace greenmeter
