#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace greenmeter::ts {

struct Sample {
    std::int64_t epoch = 0;
    double value = 0.0;

    bool operator==(const Sample&) const = default;
};

// Timestamped samples on a fixed step grid. Epochs are strictly increasing
// and every gap is a whole multiple of the step; missing points stay missing.
class TimeSeries {
public:
    explicit TimeSeries(std::int64_t step_seconds = 1);
    TimeSeries(std::int64_t step_seconds, std::vector<Sample> samples);

    void append(std::int64_t epoch, double value);

    std::int64_t step_seconds() const noexcept { return step_; }
    std::span<const Sample> samples() const noexcept { return samples_; }
    std::size_t size() const noexcept { return samples_.size(); }
    bool empty() const noexcept { return samples_.empty(); }
    const Sample& front() const { return samples_.front(); }
    const Sample& back() const { return samples_.back(); }

    bool operator==(const TimeSeries&) const = default;

private:
    std::int64_t step_;
    std::vector<Sample> samples_;
};

enum class Consolidation { average, max };

/// Fixed-capacity archive in the style of an RRD round-robin archive.
///
/// Every `consolidation_factor` primary values pushed are reduced to one
/// stored point stamped with the epoch of the last primary value in the
/// bucket. Once `capacity` points are stored the oldest is evicted. The
/// bucket still being filled is visible to readers with the consolidation
/// applied to the values seen so far.
///
/// Single writer; a const archive may be read concurrently.
class RoundRobinArchive {
public:
    static constexpr std::size_t default_capacity = 86400;

    explicit RoundRobinArchive(std::size_t capacity = default_capacity,
                               std::int64_t step_seconds = 1,
                               Consolidation consolidation = Consolidation::average,
                               std::size_t consolidation_factor = 1);

    // Epochs must strictly increase across pushes.
    void push(std::int64_t epoch, double value);

    TimeSeries fetch(std::int64_t t0, std::int64_t t1) const;

    // Completed points followed by the partial bucket, if any.
    std::vector<Sample> points() const;

    std::size_t stored() const noexcept { return ring_.size(); }
    std::size_t capacity() const noexcept { return capacity_; }
    std::int64_t step_seconds() const noexcept { return step_; }
    Consolidation consolidation() const noexcept { return consolidation_; }
    std::size_t consolidation_factor() const noexcept { return factor_; }

private:
    std::size_t capacity_;
    std::int64_t step_;
    Consolidation consolidation_;
    std::size_t factor_;

    std::deque<Sample> ring_;
    std::size_t pending_count_ = 0;
    double pending_value_ = 0.0;
    std::int64_t pending_epoch_ = 0;
    bool has_pushed_ = false;
    std::int64_t last_epoch_ = 0;
};

// Collectd-style metric identity: category plus the sensor read from it.
enum class Category { cpu, memory, disk, network };
enum class Sensor { value, receive, transmit, read, write };

struct MetricName {
    Category category = Category::cpu;
    Sensor sensor = Sensor::value;

    auto operator<=>(const MetricName&) const = default;
};

bool sensor_valid_for(Category category, Sensor sensor);
std::string to_string(Category category);
std::string to_string(Sensor sensor);
std::string to_string(const MetricName& name);

using ResourceSeries = std::map<MetricName, TimeSeries>;

struct AlignedSample {
    std::int64_t epoch = 0;
    std::map<MetricName, double> resource_values;
    double power_watts = 0.0;

    bool operator==(const AlignedSample&) const = default;
};

/// Pairs every resource epoch present in all metrics with the power sample
/// nearest in time, if one lies within `max_gap_seconds`. Equidistant power
/// samples resolve to the earlier one. Nothing is interpolated.
std::vector<AlignedSample> align(const ResourceSeries& resources, const TimeSeries& power,
                                 std::int64_t max_gap_seconds);

} // namespace greenmeter::ts
