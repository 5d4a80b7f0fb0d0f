#include "greenmeter/ingest.hpp"

#include "greenmeter/error.hpp"
#include "greenmeter/kvdoc.hpp"

#include <cmath>
#include <map>
#include <numeric>
#include <set>

namespace greenmeter::ingest {

namespace {

constexpr std::string_view resource_header = "epoch,category,sensor,value";

std::int64_t gcd_step(const std::vector<ts::Sample>& samples)
{
    std::int64_t step = 0;
    for (std::size_t i = 1; i < samples.size(); ++i) {
        step = std::gcd(step, samples[i].epoch - samples[i - 1].epoch);
    }
    return step == 0 ? 1 : step;
}

// Splits "a b" on runs of spaces/tabs.
std::vector<std::string_view> fields_ws(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (pos < line.size()) {
        while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) {
            ++pos;
        }
        if (pos == line.size()) {
            break;
        }
        auto end = line.find_first_of(" \t", pos);
        if (end == std::string_view::npos) {
            end = line.size();
        }
        out.push_back(line.substr(pos, end - pos));
        pos = end;
    }
    return out;
}

} // namespace

std::optional<MetricName> parse_metric_name(std::string_view category, std::string_view sensor)
{
    static const std::map<std::string_view, Category> categories = {
        {"cpu", Category::cpu},
        {"memory", Category::memory},
        {"disk", Category::disk},
        {"network", Category::network},
    };
    static const std::map<std::string_view, Sensor> sensors = {
        {"value", Sensor::value}, {"receive", Sensor::receive}, {"transmit", Sensor::transmit},
        {"read", Sensor::read},   {"write", Sensor::write},
    };
    auto c = categories.find(category);
    auto s = sensors.find(sensor);
    if (c == categories.end() || s == sensors.end() || !ts::sensor_valid_for(c->second, s->second)) {
        return std::nullopt;
    }
    return MetricName{c->second, s->second};
}

ResourceSeries parse_resource_csv(std::string_view text)
{
    auto lines = split_lines(text);
    if (lines.empty() || lines[0] != resource_header) {
        throw Error(Errc::format, 1, "expected header '" + std::string(resource_header) + "'");
    }

    std::map<MetricName, std::map<std::int64_t, double>> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto lineno = i + 1;
        auto cols = split(lines[i], ',');
        if (cols.size() != 4) {
            throw Error(Errc::format, lineno, "expected 4 comma-separated fields");
        }
        auto epoch = parse_int(cols[0]);
        if (!epoch) {
            throw Error(Errc::format, lineno, "epoch '" + std::string(cols[0]) + "' is not an integer");
        }
        auto name = parse_metric_name(cols[1], cols[2]);
        if (!name) {
            throw Error(Errc::format, lineno, "unknown metric '" + std::string(cols[1]) + "." +
                                                  std::string(cols[2]) + "'");
        }
        auto value = parse_real(cols[3]);
        if (!value) {
            throw Error(Errc::format, lineno, "value '" + std::string(cols[3]) + "' is not a finite number");
        }
        if (!rows[*name].emplace(*epoch, *value).second) {
            throw Error(Errc::duplicate, lineno, "second sample for " + ts::to_string(*name) +
                                                     " at epoch " + std::to_string(*epoch));
        }
    }

    ResourceSeries out;
    for (const auto& [name, by_epoch] : rows) {
        std::vector<ts::Sample> samples;
        samples.reserve(by_epoch.size());
        for (const auto& [epoch, value] : by_epoch) {
            samples.push_back({epoch, value});
        }
        auto step = gcd_step(samples);
        out.emplace(name, TimeSeries(step, std::move(samples)));
    }
    return out;
}

std::string serialize_resource_csv(const ResourceSeries& series)
{
    std::string out(resource_header);
    out += '\n';
    for (const auto& [name, s] : series) {
        const auto prefix = ts::to_string(name.category) + "," + ts::to_string(name.sensor) + ",";
        for (const auto& sample : s.samples()) {
            out += std::to_string(sample.epoch);
            out += ',';
            out += prefix;
            out += format_real(sample.value);
            out += '\n';
        }
    }
    return out;
}

TimeSeries parse_power_log(std::string_view text)
{
    auto lines = split_lines(text);
    std::vector<ts::Sample> samples;
    samples.reserve(lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto lineno = i + 1;
        auto cols = fields_ws(lines[i]);
        if (cols.size() != 2) {
            throw Error(Errc::format, lineno, "expected '<epoch> <watts>'");
        }
        auto epoch = parse_int(cols[0]);
        auto watts = parse_real(cols[1]);
        if (!epoch || !watts) {
            throw Error(Errc::format, lineno, "expected integer epoch and finite watts");
        }
        if (*watts < 0.0) {
            throw Error(Errc::format, lineno, "negative power reading");
        }
        if (!samples.empty() && *epoch <= samples.back().epoch) {
            throw Error(Errc::out_of_order, lineno, "epoch " + std::to_string(*epoch) +
                                                        " does not follow " +
                                                        std::to_string(samples.back().epoch));
        }
        samples.push_back({*epoch, *watts});
    }
    auto step = gcd_step(samples);
    return TimeSeries(step, std::move(samples));
}

std::string serialize_power_log(const TimeSeries& power)
{
    std::string out;
    for (const auto& s : power.samples()) {
        out += std::to_string(s.epoch);
        out += ' ';
        out += format_real(s.value);
        out += '\n';
    }
    return out;
}

ExperimentMarks parse_marks(std::string_view text)
{
    auto lines = split_lines(text);
    if (lines.size() != 2) {
        throw Error(Errc::format, lines.size() < 2 ? lines.size() + 1 : 3,
                    "marks file must hold exactly two lines");
    }
    auto read = [&](std::size_t idx, std::string_view keyword) {
        auto cols = fields_ws(lines[idx]);
        if (cols.size() != 2 || cols[0] != keyword) {
            throw Error(Errc::format, idx + 1, "expected '" + std::string(keyword) + " <epoch>'");
        }
        auto epoch = parse_int(cols[1]);
        if (!epoch) {
            throw Error(Errc::format, idx + 1, "epoch is not an integer");
        }
        return *epoch;
    };
    ExperimentMarks marks{read(0, "start"), read(1, "end")};
    if (marks.end_epoch < marks.start_epoch) {
        throw Error(Errc::invalid_marks, 2, "end " + std::to_string(marks.end_epoch) +
                                                " precedes start " + std::to_string(marks.start_epoch));
    }
    return marks;
}

std::string serialize_marks(const ExperimentMarks& marks)
{
    return "start " + std::to_string(marks.start_epoch) + "\nend " + std::to_string(marks.end_epoch) + "\n";
}

double quantize(double watts, double step)
{
    if (!(watts >= 0.0) || !std::isfinite(watts)) {
        throw Error(Errc::domain, "power must be a finite non-negative value");
    }
    if (step <= 0.0) {
        return watts;
    }
    return step * std::round(watts / step);
}

double quantize_power(double watts) { return quantize(watts, meter_step_watts); }

} // namespace greenmeter::ingest
