#include "greenmeter/simcloud.hpp"

#include "greenmeter/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

namespace greenmeter::sim {

namespace {

constexpr double gib = 1024.0 * 1024.0 * 1024.0;

// Independent random streams; a draw is a pure function of (seed, stream, index).
enum Stream : std::uint64_t {
    stream_bg_cpu = 1,
    stream_bg_mem,
    stream_bg_disk,
    stream_bg_net,
    stream_cpu,
    stream_mem,
    stream_disk,
    stream_net,
    stream_phase,
    stream_jitter,
    stream_noise,
    stream_mix,
};

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

Utilization background(std::uint64_t seed, std::int64_t t)
{
    return {
        0.004 + 0.004 * unit_draw(seed, stream_bg_cpu, t),
        0.006 + 0.002 * unit_draw(seed, stream_bg_mem, t),
        0.002 * unit_draw(seed, stream_bg_disk, t),
        0.002 * unit_draw(seed, stream_bg_net, t),
    };
}

double cpu_level(int threads, const Flavor& flavor, std::uint64_t seed, std::int64_t t)
{
    const double target = std::min(1.0, static_cast<double>(threads) / flavor.vcpus);
    if (t < cpu_ramp_seconds) {
        return target * (0.5 + 0.5 * static_cast<double>(t) / cpu_ramp_seconds);
    }
    return target * (0.97 + 0.03 * unit_draw(seed, stream_cpu, t));
}

// Recursive fork grows memory exponentially, then malloc/free cycling holds a
// near-constant plateau.
double mem_level(int threads, std::int64_t bytes, const Flavor& flavor, std::uint64_t seed, std::int64_t t)
{
    const double target =
        std::min(1.0, static_cast<double>(threads) * static_cast<double>(bytes) / (flavor.mem_gb * gib));
    if (t < mem_ramp_seconds) {
        return target * std::exp2(static_cast<double>(t - mem_ramp_seconds));
    }
    return target * (0.95 + 0.04 * unit_draw(seed, stream_mem, t));
}

double disk_level(int io_threads, std::uint64_t seed, std::int64_t t)
{
    const double peak = std::min(1.0, io_threads / 4.0);
    const double d = unit_draw(seed, stream_disk, t);
    return disk_sync_active(seed, t) ? peak * (0.85 + 0.15 * d) : peak * 0.03 * d;
}

struct Trace {
    std::vector<Utilization> per_second; // index 0 is the first recorded epoch
    std::int64_t first_epoch = 0;
};

ExperimentRecord meter(const HostModel& host, const Trace& trace, std::uint64_t seed,
                       const SimOptions& options)
{
    ExperimentRecord rec;
    for (std::size_t i = 0; i < trace.per_second.size(); ++i) {
        append_readings(rec.resources, trace.first_epoch + static_cast<std::int64_t>(i),
                        trace.per_second[i], options.normalization);
    }

    const auto last_epoch = trace.first_epoch + static_cast<std::int64_t>(trace.per_second.size()) - 1;
    rec.power = ts::TimeSeries(host.meter_period_seconds);
    std::int64_t k = 0;
    for (auto epoch = trace.first_epoch; epoch <= last_epoch; epoch += host.meter_period_seconds, ++k) {
        // The meter loop is free-running: the reading taken near this tick
        // reflects the load of the second it actually fell into.
        const double jitter = options.meter_jitter_seconds * (2.0 * unit_draw(seed, stream_jitter, k) - 1.0);
        auto second = static_cast<std::int64_t>(std::floor(static_cast<double>(epoch) + jitter));
        second = std::clamp(second, trace.first_epoch, last_epoch);
        const auto& u = trace.per_second[static_cast<std::size_t>(second - trace.first_epoch)];
        rec.power.append(epoch, gen_power(host, u, normal_draw(seed, stream_noise, k)));
    }
    rec.ground_truth = host;
    return rec;
}

void check_duration(std::int64_t duration_seconds)
{
    if (duration_seconds < min_duration_seconds) {
        throw Error(Errc::configuration, "duration must be at least " + std::to_string(min_duration_seconds) +
                                             "s, got " + std::to_string(duration_seconds) + "s");
    }
}

} // namespace

Flavor m1_small() { return {"m1.small", 4, 8.0, 10.0}; }

std::string to_string(WorkloadKind kind)
{
    switch (kind) {
    case WorkloadKind::idle: return "idle";
    case WorkloadKind::cpu_spin: return "cpu_spin";
    case WorkloadKind::mem_cycle: return "mem_cycle";
    case WorkloadKind::disk_io: return "disk_io";
    case WorkloadKind::net_transfer: return "net_transfer";
    case WorkloadKind::stress_composite: return "stress_composite";
    }
    return "?";
}

std::optional<WorkloadKind> parse_workload_kind(std::string_view text)
{
    for (auto kind : {WorkloadKind::idle, WorkloadKind::cpu_spin, WorkloadKind::mem_cycle, WorkloadKind::disk_io,
                      WorkloadKind::net_transfer, WorkloadKind::stress_composite}) {
        if (text == to_string(kind)) {
            return kind;
        }
    }
    return std::nullopt;
}

WorkloadSpec default_workload(WorkloadKind kind)
{
    WorkloadSpec w;
    w.kind = kind;
    switch (kind) {
    case WorkloadKind::idle:
        break;
    case WorkloadKind::cpu_spin:
        w.cpu_threads = 4;
        break;
    case WorkloadKind::mem_cycle:
        w.vm_threads = 2;
        w.vm_bytes = 4LL * 1024 * 1024 * 1024;
        break;
    case WorkloadKind::disk_io:
        w.io_threads = 4;
        break;
    case WorkloadKind::net_transfer:
        w.net_rate_bytes_per_sec = 1e6;
        break;
    case WorkloadKind::stress_composite:
        w.cpu_threads = 8;
        w.io_threads = 4;
        w.vm_threads = 2;
        w.vm_bytes = 128LL * 1024 * 1024;
        w.duration_seconds = 10;
        break;
    }
    return w;
}

void validate(const Flavor& flavor)
{
    if (flavor.vcpus <= 0 || !(flavor.mem_gb > 0.0) || !(flavor.disk_gb > 0.0)) {
        throw Error(Errc::configuration, "flavor '" + flavor.name + "' needs positive capacities");
    }
}

void validate(const WorkloadSpec& w)
{
    for (int threads : {w.cpu_threads, w.io_threads, w.vm_threads}) {
        if (threads < 0 || threads > max_threads) {
            throw Error(Errc::configuration, "thread counts must lie in [0, " + std::to_string(max_threads) + "]");
        }
    }
    if (w.vm_bytes < 0 || !(w.net_rate_bytes_per_sec >= 0.0) || !std::isfinite(w.net_rate_bytes_per_sec)) {
        throw Error(Errc::configuration, "vm_bytes and net rate must be non-negative");
    }
    if (w.duration_seconds <= 0) {
        throw Error(Errc::configuration, "workload duration must be positive");
    }
}

void validate(const HostModel& host)
{
    const double betas[] = {host.beta_cpu, host.beta_mem, host.beta_disk, host.beta_net};
    for (double b : betas) {
        if (!std::isfinite(b) || b < 0.0) {
            throw Error(Errc::configuration, "host betas must be finite and non-negative");
        }
    }
    if (!(host.static_watts >= 0.0) || !(host.noise_sigma_watts >= 0.0) || !(host.meter_step_watts >= 0.0)) {
        throw Error(Errc::configuration, "static power, noise and meter step must be non-negative");
    }
    if (!(host.dynamic_cap_watts > 0.0) || host.dynamic_cap_watts < *std::max_element(std::begin(betas), std::end(betas))) {
        throw Error(Errc::configuration, "dynamic cap must be positive and at least the largest beta");
    }
    if (host.meter_period_seconds <= 0) {
        throw Error(Errc::configuration, "meter period must be positive");
    }
}

std::int64_t disk_sync_phase(std::uint64_t seed)
{
    return static_cast<std::int64_t>(unit_draw(seed, stream_phase, 0) * disk_sync_period_seconds);
}

bool disk_sync_active(std::uint64_t seed, std::int64_t t)
{
    return (t + disk_sync_phase(seed)) % disk_sync_period_seconds < disk_sync_on_seconds;
}

double unit_draw(std::uint64_t seed, std::uint64_t stream, std::int64_t index)
{
    std::uint64_t x = splitmix64(seed);
    x = splitmix64(x ^ (stream * 0xd1b54a32d192ed03ULL));
    x = splitmix64(x ^ static_cast<std::uint64_t>(index));
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

double normal_draw(std::uint64_t seed, std::uint64_t stream, std::int64_t index)
{
    // Two disjoint sub-streams feed one Box-Muller pair.
    const double u1 = unit_draw(seed, stream, 2 * index);
    const double u2 = unit_draw(seed, stream, 2 * index + 1);
    return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Utilization gen_utilization(const WorkloadSpec& workload, const Flavor& flavor, std::uint64_t seed,
                            std::int64_t t, const Normalization& norm)
{
    if (t < 0 || t >= workload.duration_seconds) {
        throw Error(Errc::domain, "t=" + std::to_string(t) + " outside [0, " +
                                      std::to_string(workload.duration_seconds) + ")");
    }
    Utilization u = background(seed, t);
    switch (workload.kind) {
    case WorkloadKind::idle:
        break;
    case WorkloadKind::cpu_spin:
        u.cpu += cpu_level(workload.cpu_threads, flavor, seed, t);
        break;
    case WorkloadKind::mem_cycle:
        u.mem += mem_level(workload.vm_threads, workload.vm_bytes, flavor, seed, t);
        u.cpu += 0.02;
        break;
    case WorkloadKind::disk_io:
        u.disk += disk_level(workload.io_threads, seed, t);
        u.cpu += 0.03;
        break;
    case WorkloadKind::net_transfer:
        u.net += std::min(1.0, workload.net_rate_bytes_per_sec / norm.net_bytes_per_sec) *
                 (0.9 + 0.1 * unit_draw(seed, stream_net, t));
        u.cpu += 0.02;
        break;
    case WorkloadKind::stress_composite:
        u.cpu += cpu_level(workload.cpu_threads, flavor, seed, t);
        u.mem += mem_level(workload.vm_threads, workload.vm_bytes, flavor, seed, t);
        u.disk += disk_level(workload.io_threads, seed, t);
        break;
    }
    return {clamp01(u.cpu), clamp01(u.mem), clamp01(u.disk), clamp01(u.net)};
}

double dynamic_power(const HostModel& host, const Utilization& u)
{
    const double raw = host.beta_cpu * u.cpu + host.beta_mem * u.mem + host.beta_disk * u.disk + host.beta_net * u.net;
    return std::min(raw, host.dynamic_cap_watts);
}

double gen_power(const HostModel& host, const Utilization& u, double z)
{
    const double watts = std::max(0.0, host.static_watts + dynamic_power(host, u) + host.noise_sigma_watts * z);
    return ingest::quantize(watts, host.meter_step_watts);
}

void append_readings(ts::ResourceSeries& series, std::int64_t epoch, const Utilization& u, const Normalization& norm)
{
    using ts::Category;
    using ts::Sensor;
    auto put = [&](Category c, Sensor s, double v) {
        auto [it, inserted] = series.try_emplace(ts::MetricName{c, s}, 1);
        it->second.append(epoch, v);
    };
    put(Category::cpu, Sensor::value, u.cpu * norm.cpu_percent);
    put(Category::memory, Sensor::value, u.mem * norm.mem_bytes);
    put(Category::disk, Sensor::read, 0.1 * u.disk * norm.disk_bytes_per_sec);
    put(Category::disk, Sensor::write, 0.9 * u.disk * norm.disk_bytes_per_sec);
    put(Category::network, Sensor::receive, 0.5 * u.net * norm.net_bytes_per_sec);
    put(Category::network, Sensor::transmit, 0.5 * u.net * norm.net_bytes_per_sec);
}

Utilization utilization_from_readings(const std::map<ts::MetricName, double>& readings, const Normalization& norm)
{
    using ts::Category;
    using ts::Sensor;
    auto get = [&](Category c, Sensor s) {
        auto it = readings.find(ts::MetricName{c, s});
        return it == readings.end() ? 0.0 : it->second;
    };
    return {
        clamp01(get(Category::cpu, Sensor::value) / norm.cpu_percent),
        clamp01(get(Category::memory, Sensor::value) / norm.mem_bytes),
        clamp01((get(Category::disk, Sensor::read) + get(Category::disk, Sensor::write)) / norm.disk_bytes_per_sec),
        clamp01((get(Category::network, Sensor::receive) + get(Category::network, Sensor::transmit)) /
                norm.net_bytes_per_sec),
    };
}

ExperimentRecord run_experiment(const Flavor& flavor, const WorkloadSpec& workload, const HostModel& host,
                                std::uint64_t seed, std::int64_t duration_seconds, const SimOptions& options)
{
    return run_mix(host, {MixEntry{flavor, workload}}, seed, duration_seconds, options);
}

std::uint64_t vm_seed(std::uint64_t seed, std::size_t index)
{
    if (index == 0) {
        return seed;
    }
    return splitmix64(seed ^ splitmix64(stream_mix * 0x2545f4914f6cdd1dULL + index));
}

ExperimentRecord run_mix(const HostModel& host, const std::vector<MixEntry>& vms, std::uint64_t seed,
                         std::int64_t duration_seconds, const SimOptions& options)
{
    if (vms.empty() || vms.size() > max_mix_vms) {
        throw Error(Errc::configuration, "a run needs between 1 and " + std::to_string(max_mix_vms) + " VMs");
    }
    check_duration(duration_seconds);
    validate(host);
    if (options.idle_padding_seconds < 0) {
        throw Error(Errc::configuration, "idle padding must be non-negative");
    }

    std::vector<MixEntry> entries = vms;
    for (auto& e : entries) {
        validate(e.flavor);
        e.workload.duration_seconds = duration_seconds;
        validate(e.workload);
    }

    const auto start = options.start_epoch;
    const auto end = start + duration_seconds;
    Trace trace;
    trace.first_epoch = start - options.idle_padding_seconds;
    const auto last = end + options.idle_padding_seconds;
    trace.per_second.resize(static_cast<std::size_t>(last - trace.first_epoch + 1));
    for (auto epoch = start; epoch < end; ++epoch) {
        std::array<double, 4> total{};
        for (std::size_t i = 0; i < entries.size(); ++i) {
            auto u = gen_utilization(entries[i].workload, entries[i].flavor, vm_seed(seed, i), epoch - start,
                                     options.normalization)
                         .as_array();
            for (std::size_t r = 0; r < 4; ++r) {
                total[r] += u[r];
            }
        }
        for (auto& v : total) {
            v = clamp01(v);
        }
        trace.per_second[static_cast<std::size_t>(epoch - trace.first_epoch)] = Utilization::from_array(total);
    }

    // Runs of different workloads under the same seed get independent meter noise.
    std::uint64_t meter_seed = seed;
    for (const auto& e : entries) {
        meter_seed = splitmix64(meter_seed ^ (static_cast<std::uint64_t>(e.workload.kind) + 1));
    }
    auto rec = meter(host, trace, meter_seed, options);
    rec.flavor = entries.front().flavor;
    rec.workload = entries.front().workload;
    rec.marks = {start, end};
    if (entries.size() > 1) {
        rec.mix = entries;
        rec.id = "mix-s" + std::to_string(seed);
    } else {
        rec.id = to_string(rec.workload.kind) + "-s" + std::to_string(seed);
    }
    return rec;
}

} // namespace greenmeter::sim
