#pragma once

#include "greenmeter/ingest.hpp"
#include "greenmeter/timeseries.hpp"
#include "greenmeter/utilization.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace greenmeter::sim {

struct Flavor {
    std::string name = "m1.small";
    int vcpus = 4;
    double mem_gb = 8.0;
    double disk_gb = 10.0;

    bool operator==(const Flavor&) const = default;
};

// The instance type used for the workload-mixture runs: 4 vCPUs, 8 GB, 10 GB.
Flavor m1_small();

enum class WorkloadKind { idle, cpu_spin, mem_cycle, disk_io, net_transfer, stress_composite };

std::string to_string(WorkloadKind kind);
std::optional<WorkloadKind> parse_workload_kind(std::string_view text);

inline constexpr int max_threads = 64;

struct WorkloadSpec {
    WorkloadKind kind = WorkloadKind::idle;
    int cpu_threads = 0;
    int io_threads = 0;
    int vm_threads = 0;
    std::int64_t vm_bytes = 0;
    std::int64_t duration_seconds = 600;
    double net_rate_bytes_per_sec = 0.0;

    bool operator==(const WorkloadSpec&) const = default;
};

// Preset parameters for each kind. stress_composite mirrors
// `stress --cpu 8 --io 4 --vm 2 --vm-bytes 128M --timeout 10s`.
WorkloadSpec default_workload(WorkloadKind kind);

void validate(const Flavor& flavor);
void validate(const WorkloadSpec& workload);

struct HostModel {
    double static_watts = 100.0;
    double beta_cpu = 35.0;
    double beta_mem = 26.0;
    double beta_disk = 9.0;
    double beta_net = 27.0;
    double dynamic_cap_watts = 100.0;
    double noise_sigma_watts = 2.0;
    double meter_step_watts = 4.0; // 0 disables quantization
    std::int64_t meter_period_seconds = 1;

    bool operator==(const HostModel&) const = default;
};

void validate(const HostModel& host);

// Disk workload write pattern: sync() bursts repeat every period, and the
// burst occupies the first `duty` fraction of each period. The phase is
// drawn from the seed.
inline constexpr std::int64_t disk_sync_period_seconds = 5;
inline constexpr std::int64_t disk_sync_on_seconds = 3;
std::int64_t disk_sync_phase(std::uint64_t seed);
bool disk_sync_active(std::uint64_t seed, std::int64_t t);

inline constexpr std::int64_t cpu_ramp_seconds = 5;
inline constexpr std::int64_t mem_ramp_seconds = 6;
inline constexpr double idle_background_limit = 0.02;

// Uniform draw in [0,1) that depends only on (seed, stream, index).
double unit_draw(std::uint64_t seed, std::uint64_t stream, std::int64_t index);
// Standard normal draw built from two unit draws (Box-Muller).
double normal_draw(std::uint64_t seed, std::uint64_t stream, std::int64_t index);

/// Utilization of one VM running `workload` at second t of the run.
/// Pure in all arguments; throws a domain error unless 0 <= t < duration.
Utilization gen_utilization(const WorkloadSpec& workload, const Flavor& flavor, std::uint64_t seed,
                            std::int64_t t, const Normalization& norm = {});

/// Metered host power for utilization u and a standard normal draw z:
/// quantize(static + min(beta . u, cap) + sigma * z), floored at zero.
double gen_power(const HostModel& host, const Utilization& u, double z);

// Dynamic (above static) power with no noise and no quantization.
double dynamic_power(const HostModel& host, const Utilization& u);

struct MixEntry {
    Flavor flavor;
    WorkloadSpec workload;

    bool operator==(const MixEntry&) const = default;
};

struct ExperimentRecord {
    std::string id;
    Flavor flavor;
    WorkloadSpec workload;
    ingest::ExperimentMarks marks;
    ts::ResourceSeries resources;
    ts::TimeSeries power;
    std::optional<HostModel> ground_truth;
    // Non-empty for multi-VM runs; flavor/workload then describe the first VM.
    std::vector<MixEntry> mix;

    bool operator==(const ExperimentRecord&) const = default;
};

struct SimOptions {
    std::int64_t start_epoch = 1300000000;
    // Idle seconds recorded on each side of the run for static-power estimation.
    std::int64_t idle_padding_seconds = 60;
    // Power meter samples are taken up to this far from the nominal tick.
    double meter_jitter_seconds = 0.3;
    Normalization normalization;
};

inline constexpr std::int64_t min_duration_seconds = 10;
inline constexpr std::size_t max_mix_vms = 16;

/// Simulates one VM on an otherwise idle host. Resource series are sampled
/// every second over [start - padding, end + padding]; the workload runs
/// during [start, end). Power is metered every meter period.
ExperimentRecord run_experiment(const Flavor& flavor, const WorkloadSpec& workload, const HostModel& host,
                                std::uint64_t seed, std::int64_t duration_seconds,
                                const SimOptions& options = {});

// Seed used for VM `index` inside a mix.
std::uint64_t vm_seed(std::uint64_t seed, std::size_t index);

/// Simulates several VMs sharing the host. Per-resource utilizations are
/// summed and clamped to [0,1] before the power cap applies.
ExperimentRecord run_mix(const HostModel& host, const std::vector<MixEntry>& vms, std::uint64_t seed,
                         std::int64_t duration_seconds, const SimOptions& options = {});

// Raw collectd-style readings for a utilization vector, and back.
void append_readings(ts::ResourceSeries& series, std::int64_t epoch, const Utilization& u,
                     const Normalization& norm);
Utilization utilization_from_readings(const std::map<ts::MetricName, double>& readings,
                                      const Normalization& norm);

} // namespace greenmeter::sim
