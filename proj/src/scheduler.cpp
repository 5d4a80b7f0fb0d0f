#include "greenmeter/scheduler.hpp"

#include "greenmeter/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace greenmeter::sched {

namespace {

// Absolute slack on the cap check so that re-summing the same loads in a
// different order cannot flip feasibility.
constexpr double cap_slack_watts = 1e-9;
constexpr double tie_epsilon = 1e-12;

bool fits_cap(double load, double cap) { return load <= cap + cap_slack_watts; }

std::map<std::string, const Job*> index_jobs(std::span<const Job> jobs)
{
    std::map<std::string, const Job*> by_id;
    for (const auto& j : jobs) {
        by_id.emplace(j.id, &j);
    }
    return by_id;
}

double utilization_of(const std::vector<double>& load, const std::vector<double>& green)
{
    double covered = 0.0;
    double consumed = 0.0;
    for (std::size_t s = 0; s < load.size(); ++s) {
        covered += std::min(load[s], green[s]);
        consumed += load[s];
    }
    return consumed > 0.0 ? covered / consumed : 1.0;
}

void check_cap(double host_cap_watts)
{
    if (!(host_cap_watts > 0.0) || !std::isfinite(host_cap_watts)) {
        throw Error(Errc::configuration, "host cap must be a positive finite wattage");
    }
}

std::vector<const Job*> sorted_by_id(std::span<const Job> jobs)
{
    std::vector<const Job*> out;
    for (const auto& j : jobs) {
        out.push_back(&j);
    }
    std::sort(out.begin(), out.end(), [](const Job* a, const Job* b) { return a->id < b->id; });
    return out;
}

} // namespace

void validate(const GreenForecast& forecast)
{
    if (forecast.slot_seconds <= 0) {
        throw Error(Errc::configuration, "slot length must be positive");
    }
    if (forecast.green_watts.empty()) {
        throw Error(Errc::configuration, "forecast is empty");
    }
    for (double g : forecast.green_watts) {
        if (!std::isfinite(g) || g < 0.0) {
            throw Error(Errc::configuration, "green power must be finite and non-negative");
        }
    }
}

void validate(std::span<const Job> jobs)
{
    std::set<std::string> seen;
    for (const auto& j : jobs) {
        if (j.id.empty() || !seen.insert(j.id).second) {
            throw Error(Errc::configuration, "job ids must be unique and non-empty ('" + j.id + "')");
        }
        if (!(j.predicted_watts > 0.0) || !std::isfinite(j.predicted_watts)) {
            throw Error(Errc::configuration, "job '" + j.id + "' needs positive predicted power");
        }
        if (!(j.peak_watts >= j.predicted_watts) || !std::isfinite(j.peak_watts)) {
            throw Error(Errc::configuration, "job '" + j.id + "' peak power is below its predicted power");
        }
        if (j.duration_slots < 1) {
            throw Error(Errc::configuration, "job '" + j.id + "' needs a positive duration");
        }
    }
}

Admission admit_coarse(std::span<const Job> jobs, double host_cap_watts)
{
    check_cap(host_cap_watts);
    Admission out;
    for (const auto& j : jobs) {
        (j.peak_watts > host_cap_watts ? out.rejected : out.admitted).push_back(j);
    }
    return out;
}

std::vector<double> slot_load(const Schedule& schedule, std::span<const Job> jobs, std::size_t horizon)
{
    const auto by_id = index_jobs(jobs);
    std::vector<double> load(horizon, 0.0);
    for (const auto& [id, start] : schedule.assignments) {
        auto it = by_id.find(id);
        if (it == by_id.end()) {
            throw Error(Errc::validation, "schedule assigns unknown job '" + id + "'");
        }
        const auto* job = it->second;
        if (start < 0 || start + job->duration_slots > static_cast<std::int64_t>(horizon)) {
            throw Error(Errc::validation, "job '" + id + "' starting at slot " + std::to_string(start) +
                                              " does not fit the " + std::to_string(horizon) + "-slot horizon");
        }
        for (auto s = start; s < start + job->duration_slots; ++s) {
            load[static_cast<std::size_t>(s)] += job->predicted_watts;
        }
    }
    return load;
}

double green_utilization(const Schedule& schedule, std::span<const Job> jobs, const GreenForecast& forecast)
{
    validate(forecast);
    check_cap(schedule.host_cap_watts);
    const auto load = slot_load(schedule, jobs, forecast.horizon());
    std::string violated;
    for (std::size_t s = 0; s < load.size(); ++s) {
        if (!fits_cap(load[s], schedule.host_cap_watts)) {
            violated += (violated.empty() ? "" : ", ") + std::to_string(s);
        }
    }
    if (!violated.empty()) {
        throw Error(Errc::validation, "cap of " + std::to_string(schedule.host_cap_watts) +
                                          " W exceeded in slots " + violated);
    }
    return utilization_of(load, forecast.green_watts);
}

Schedule schedule_greedy(std::span<const Job> jobs, const GreenForecast& forecast, double host_cap_watts)
{
    validate(forecast);
    validate(jobs);
    check_cap(host_cap_watts);

    auto order = sorted_by_id(jobs);
    std::stable_sort(order.begin(), order.end(), [](const Job* a, const Job* b) { return a->energy() > b->energy(); });

    const auto horizon = static_cast<std::int64_t>(forecast.horizon());
    const auto& green = forecast.green_watts;
    std::vector<double> load(forecast.horizon(), 0.0);

    Schedule out;
    out.host_cap_watts = host_cap_watts;
    for (const auto* job : order) {
        std::int64_t best_start = -1;
        double best_gain = -std::numeric_limits<double>::infinity();
        for (std::int64_t start = 0; start + job->duration_slots <= horizon; ++start) {
            double gain = 0.0;
            bool feasible = true;
            for (auto s = start; s < start + job->duration_slots; ++s) {
                const auto i = static_cast<std::size_t>(s);
                if (!fits_cap(load[i] + job->predicted_watts, host_cap_watts)) {
                    feasible = false;
                    break;
                }
                gain += std::min(load[i] + job->predicted_watts, green[i]) - std::min(load[i], green[i]);
            }
            if (feasible && gain > best_gain) {
                best_gain = gain;
                best_start = start;
            }
        }
        if (best_start < 0) {
            out.unassigned.push_back(job->id);
            continue;
        }
        out.assignments[job->id] = best_start;
        for (auto s = best_start; s < best_start + job->duration_slots; ++s) {
            load[static_cast<std::size_t>(s)] += job->predicted_watts;
        }
    }
    std::sort(out.unassigned.begin(), out.unassigned.end());
    return out;
}

namespace {

class ExactSearch {
public:
    ExactSearch(std::vector<const Job*> jobs, const GreenForecast& forecast, double cap, bool allow_unassigned)
        : jobs_(std::move(jobs)), green_(forecast.green_watts), cap_(cap), allow_unassigned_(allow_unassigned),
          load_(forecast.horizon(), 0.0), starts_(jobs_.size(), unassigned)
    {
    }

    static constexpr std::int64_t unassigned = std::numeric_limits<std::int64_t>::max();

    bool run()
    {
        recurse(0, 0);
        return found_;
    }

    const std::vector<std::int64_t>& best() const { return best_starts_; }

private:
    void recurse(std::size_t j, std::size_t placed)
    {
        if (j == jobs_.size()) {
            consider(placed);
            return;
        }
        const auto* job = jobs_[j];
        const auto horizon = static_cast<std::int64_t>(load_.size());
        for (std::int64_t start = 0; start + job->duration_slots <= horizon; ++start) {
            bool feasible = true;
            for (auto s = start; s < start + job->duration_slots; ++s) {
                if (!fits_cap(load_[static_cast<std::size_t>(s)] + job->predicted_watts, cap_)) {
                    feasible = false;
                    break;
                }
            }
            if (!feasible) {
                continue;
            }
            auto saved = load_;
            for (auto s = start; s < start + job->duration_slots; ++s) {
                load_[static_cast<std::size_t>(s)] += job->predicted_watts;
            }
            starts_[j] = start;
            recurse(j + 1, placed + 1);
            load_ = std::move(saved);
        }
        if (allow_unassigned_) {
            starts_[j] = unassigned;
            recurse(j + 1, placed);
        }
    }

    // Enumeration runs in lexicographic order of the start vector, so only a
    // strictly better candidate replaces the incumbent.
    void consider(std::size_t placed)
    {
        const double util = utilization_of(load_, green_);
        if (!found_ || placed > best_placed_ || (placed == best_placed_ && util > best_util_ + tie_epsilon)) {
            found_ = true;
            best_placed_ = placed;
            best_util_ = util;
            best_starts_ = starts_;
        }
    }

    std::vector<const Job*> jobs_;
    const std::vector<double>& green_;
    double cap_;
    bool allow_unassigned_;
    std::vector<double> load_;
    std::vector<std::int64_t> starts_;

    bool found_ = false;
    std::size_t best_placed_ = 0;
    double best_util_ = 0.0;
    std::vector<std::int64_t> best_starts_;
};

} // namespace

Schedule schedule_exact(std::span<const Job> jobs, const GreenForecast& forecast, double host_cap_watts)
{
    validate(forecast);
    validate(jobs);
    check_cap(host_cap_watts);
    if (jobs.size() > exact_max_jobs || forecast.horizon() > exact_max_slots) {
        throw Error(Errc::size, "exact search is limited to " + std::to_string(exact_max_jobs) + " jobs and " +
                                    std::to_string(exact_max_slots) + " slots (got " + std::to_string(jobs.size()) +
                                    " jobs, " + std::to_string(forecast.horizon()) + " slots)");
    }

    const auto order = sorted_by_id(jobs);
    ExactSearch full(order, forecast, host_cap_watts, false);
    std::vector<std::int64_t> starts;
    if (full.run()) {
        starts = full.best();
    } else {
        ExactSearch partial(order, forecast, host_cap_watts, true);
        partial.run();
        starts = partial.best();
    }

    Schedule out;
    out.host_cap_watts = host_cap_watts;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (starts[i] == ExactSearch::unassigned) {
            out.unassigned.push_back(order[i]->id);
        } else {
            out.assignments[order[i]->id] = starts[i];
        }
    }
    return out;
}

} // namespace greenmeter::sched
