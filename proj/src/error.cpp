#include "greenmeter/error.hpp"

namespace greenmeter {

std::string_view to_string(Errc code)
{
    switch (code) {
    case Errc::out_of_order: return "out-of-order";
    case Errc::invalid_range: return "invalid-range";
    case Errc::configuration: return "configuration";
    case Errc::format: return "format";
    case Errc::duplicate: return "duplicate";
    case Errc::domain: return "domain";
    case Errc::invalid_marks: return "invalid-marks";
    case Errc::estimation: return "estimation";
    case Errc::extraction: return "extraction";
    case Errc::fit: return "fit";
    case Errc::data: return "data";
    case Errc::usage: return "usage";
    case Errc::validation: return "validation";
    case Errc::size: return "size";
    case Errc::conflict: return "conflict";
    case Errc::storage: return "storage";
    case Errc::version: return "version";
    }
    return "unknown";
}

namespace {

std::string decorate(Errc code, const std::string& message)
{
    return std::string(to_string(code)) + " error: " + message;
}

std::string decorate(Errc code, std::size_t line, const std::string& message)
{
    return std::string(to_string(code)) + " error at line " + std::to_string(line) + ": " + message;
}

} // namespace

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(decorate(code, message)), code_(code)
{
}

Error::Error(Errc code, std::size_t line, const std::string& message)
    : std::runtime_error(decorate(code, line, message)), code_(code), line_(line)
{
}

} // namespace greenmeter
