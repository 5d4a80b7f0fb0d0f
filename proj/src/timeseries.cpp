#include "greenmeter/timeseries.hpp"

#include "greenmeter/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace greenmeter::ts {

namespace {

void check_step(std::int64_t step)
{
    if (step <= 0) {
        throw Error(Errc::configuration, "step_seconds must be positive");
    }
}

} // namespace

TimeSeries::TimeSeries(std::int64_t step_seconds) : step_(step_seconds) { check_step(step_); }

TimeSeries::TimeSeries(std::int64_t step_seconds, std::vector<Sample> samples) : step_(step_seconds)
{
    check_step(step_);
    samples_.reserve(samples.size());
    for (const auto& s : samples) {
        append(s.epoch, s.value);
    }
}

void TimeSeries::append(std::int64_t epoch, double value)
{
    if (!std::isfinite(value)) {
        throw Error(Errc::data, "non-finite sample at epoch " + std::to_string(epoch));
    }
    if (!samples_.empty()) {
        auto last = samples_.back().epoch;
        if (epoch <= last) {
            throw Error(Errc::out_of_order, "epoch " + std::to_string(epoch) + " does not follow " +
                                                std::to_string(last));
        }
        if ((epoch - last) % step_ != 0) {
            throw Error(Errc::data, "epoch " + std::to_string(epoch) + " is off the " +
                                        std::to_string(step_) + "s grid");
        }
    }
    samples_.push_back({epoch, value});
}

RoundRobinArchive::RoundRobinArchive(std::size_t capacity, std::int64_t step_seconds,
                                     Consolidation consolidation, std::size_t consolidation_factor)
    : capacity_(capacity), step_(step_seconds), consolidation_(consolidation),
      factor_(consolidation_factor)
{
    if (capacity_ == 0 || factor_ == 0) {
        throw Error(Errc::configuration, "archive capacity and consolidation factor must be positive");
    }
    check_step(step_);
}

void RoundRobinArchive::push(std::int64_t epoch, double value)
{
    if (has_pushed_ && epoch <= last_epoch_) {
        throw Error(Errc::out_of_order, "push at epoch " + std::to_string(epoch) +
                                            " after epoch " + std::to_string(last_epoch_));
    }
    if (!std::isfinite(value)) {
        throw Error(Errc::data, "non-finite value pushed at epoch " + std::to_string(epoch));
    }
    has_pushed_ = true;
    last_epoch_ = epoch;

    ++pending_count_;
    if (pending_count_ == 1) {
        pending_value_ = value;
    } else if (consolidation_ == Consolidation::max) {
        pending_value_ = std::max(pending_value_, value);
    } else {
        // Running mean: exact for constant input.
        pending_value_ += (value - pending_value_) / static_cast<double>(pending_count_);
    }
    pending_epoch_ = epoch;

    if (pending_count_ == factor_) {
        ring_.push_back({pending_epoch_, pending_value_});
        if (ring_.size() > capacity_) {
            ring_.pop_front();
        }
        pending_count_ = 0;
    }
}

std::vector<Sample> RoundRobinArchive::points() const
{
    std::vector<Sample> out(ring_.begin(), ring_.end());
    if (pending_count_ > 0) {
        out.push_back({pending_epoch_, pending_value_});
    }
    return out;
}

TimeSeries RoundRobinArchive::fetch(std::int64_t t0, std::int64_t t1) const
{
    if (t0 > t1) {
        throw Error(Errc::invalid_range, "fetch window [" + std::to_string(t0) + ", " +
                                             std::to_string(t1) + "] is reversed");
    }
    // Consolidated epochs need not sit on a common grid, so the result uses a
    // unit step.
    TimeSeries out(1);
    auto all = points();
    auto first = std::lower_bound(all.begin(), all.end(), t0,
                                  [](const Sample& s, std::int64_t t) { return s.epoch < t; });
    for (auto it = first; it != all.end() && it->epoch <= t1; ++it) {
        out.append(it->epoch, it->value);
    }
    return out;
}

bool sensor_valid_for(Category category, Sensor sensor)
{
    switch (category) {
    case Category::cpu:
    case Category::memory:
        return sensor == Sensor::value;
    case Category::disk:
        return sensor == Sensor::read || sensor == Sensor::write;
    case Category::network:
        return sensor == Sensor::receive || sensor == Sensor::transmit;
    }
    return false;
}

std::string to_string(Category category)
{
    switch (category) {
    case Category::cpu: return "cpu";
    case Category::memory: return "memory";
    case Category::disk: return "disk";
    case Category::network: return "network";
    }
    return "?";
}

std::string to_string(Sensor sensor)
{
    switch (sensor) {
    case Sensor::value: return "value";
    case Sensor::receive: return "receive";
    case Sensor::transmit: return "transmit";
    case Sensor::read: return "read";
    case Sensor::write: return "write";
    }
    return "?";
}

std::string to_string(const MetricName& name)
{
    return to_string(name.category) + "." + to_string(name.sensor);
}

std::vector<AlignedSample> align(const ResourceSeries& resources, const TimeSeries& power,
                                 std::int64_t max_gap_seconds)
{
    if (max_gap_seconds < 0) {
        throw Error(Errc::configuration, "max_gap_seconds must be non-negative");
    }
    if (resources.empty()) {
        return {};
    }
    const auto step = resources.begin()->second.step_seconds();
    for (const auto& [name, series] : resources) {
        if (series.step_seconds() != step) {
            throw Error(Errc::configuration, "resource series " + to_string(name) + " has step " +
                                                 std::to_string(series.step_seconds()) +
                                                 "s, expected " + std::to_string(step) + "s");
        }
    }

    // Epochs present in every metric.
    std::map<std::int64_t, std::map<MetricName, double>> rows;
    for (const auto& [name, series] : resources) {
        for (const auto& s : series.samples()) {
            rows[s.epoch][name] = s.value;
        }
    }

    const auto pw = power.samples();
    std::vector<AlignedSample> out;
    for (auto& [epoch, values] : rows) {
        if (values.size() != resources.size()) {
            continue;
        }
        auto next = std::lower_bound(pw.begin(), pw.end(), epoch,
                                     [](const Sample& s, std::int64_t t) { return s.epoch < t; });
        const Sample* best = nullptr;
        if (next != pw.begin()) {
            best = &*std::prev(next);
        }
        if (next != pw.end() && (best == nullptr || next->epoch - epoch < epoch - best->epoch)) {
            best = &*next;
        }
        if (best == nullptr || std::llabs(best->epoch - epoch) > max_gap_seconds) {
            continue;
        }
        if (best->value < 0.0) {
            throw Error(Errc::data, "negative power at epoch " + std::to_string(best->epoch));
        }
        out.push_back({epoch, std::move(values), best->value});
    }
    return out;
}

} // namespace greenmeter::ts
