#pragma once

#include <array>

namespace greenmeter {

// Normalized resource utilizations, each in [0,1].
struct Utilization {
    double cpu = 0.0;
    double mem = 0.0;
    double disk = 0.0;
    double net = 0.0;

    std::array<double, 4> as_array() const { return {cpu, mem, disk, net}; }
    static Utilization from_array(const std::array<double, 4>& a) { return {a[0], a[1], a[2], a[3]}; }

    bool operator==(const Utilization&) const = default;
};

// Full-scale values used to turn raw collectd readings into utilizations.
// cpu is reported in percent, memory in bytes, disk and network in bytes/s.
struct Normalization {
    double cpu_percent = 100.0;
    double mem_bytes = 8.0 * 1024 * 1024 * 1024;
    double disk_bytes_per_sec = 100e6;
    double net_bytes_per_sec = 1e6;

    bool operator==(const Normalization&) const = default;
};

} // namespace greenmeter
