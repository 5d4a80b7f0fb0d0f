#pragma once

#include "greenmeter/timeseries.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace greenmeter::ingest {

using ts::Category;
using ts::MetricName;
using ts::ResourceSeries;
using ts::Sensor;
using ts::TimeSeries;

struct ExperimentMarks {
    std::int64_t start_epoch = 0;
    std::int64_t end_epoch = 0;

    bool operator==(const ExperimentMarks&) const = default;
};

inline constexpr double meter_step_watts = 4.0;

// Resource export: header `epoch,category,sensor,value`, one sample per row.
// The step of each series is the GCD of its epoch deltas.
ResourceSeries parse_resource_csv(std::string_view text);
std::string serialize_resource_csv(const ResourceSeries& series);

// Power log: `<epoch> <watts>` per line, epochs strictly increasing.
TimeSeries parse_power_log(std::string_view text);
std::string serialize_power_log(const TimeSeries& power);

// Marks file: `start <epoch>` then `end <epoch>`.
ExperimentMarks parse_marks(std::string_view text);
std::string serialize_marks(const ExperimentMarks& marks);

std::optional<MetricName> parse_metric_name(std::string_view category, std::string_view sensor);

// Nearest multiple of `step`, halves rounded away from zero.
double quantize(double watts, double step);
double quantize_power(double watts);

} // namespace greenmeter::ingest
