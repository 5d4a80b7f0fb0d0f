#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace greenmeter::sched {

struct GreenForecast {
    std::int64_t slot_seconds = 60;
    std::vector<double> green_watts; // available green power per slot

    std::size_t horizon() const noexcept { return green_watts.size(); }
};

struct Job {
    std::string id;
    double predicted_watts = 0.0; // constant dynamic power while running
    std::int64_t duration_slots = 1;
    double peak_watts = 0.0;

    double energy() const noexcept { return predicted_watts * static_cast<double>(duration_slots); }
};

struct Schedule {
    std::map<std::string, std::int64_t> assignments; // job id -> start slot
    double host_cap_watts = 0.0;
    std::vector<std::string> unassigned;              // ids that found no feasible start
};

struct Admission {
    std::vector<Job> admitted;
    std::vector<Job> rejected;
};

inline constexpr std::size_t exact_max_jobs = 6;
inline constexpr std::size_t exact_max_slots = 12;

void validate(const GreenForecast& forecast);
void validate(std::span<const Job> jobs);

// Coarse gate: drop jobs whose peak power alone exceeds the host cap.
Admission admit_coarse(std::span<const Job> jobs, double host_cap_watts);

// Summed predicted power of the assigned jobs in every slot.
std::vector<double> slot_load(const Schedule& schedule, std::span<const Job> jobs, std::size_t horizon);

/// Green-covered fraction of consumed energy:
/// sum_slots min(load, green) / sum_slots load, and 1.0 when nothing runs.
/// Throws a validation error naming every violated slot when the schedule
/// breaks the cap or the horizon.
double green_utilization(const Schedule& schedule, std::span<const Job> jobs, const GreenForecast& forecast);

/// Places jobs in descending energy order (ties by id), each at the start
/// slot that adds the most green-covered power given the earlier
/// placements; ties go to the earliest slot. Jobs with no cap-respecting
/// start are reported in `unassigned`.
Schedule schedule_greedy(std::span<const Job> jobs, const GreenForecast& forecast, double host_cap_watts);

/// Exhaustive search for small instances (at most exact_max_jobs jobs and
/// exact_max_slots slots). Full assignments are preferred; only when none is
/// feasible are jobs left unassigned, maximizing the number placed. Among
/// equally good schedules the lexicographically smallest start vector
/// (jobs ordered by id) wins.
Schedule schedule_exact(std::span<const Job> jobs, const GreenForecast& forecast, double host_cap_watts);

// CSV surfaces.
GreenForecast parse_forecast_csv(std::string_view text, std::int64_t slot_seconds = 60);
std::string serialize_forecast_csv(const GreenForecast& forecast);
std::vector<Job> parse_jobs_csv(std::string_view text);
std::string serialize_jobs_csv(std::span<const Job> jobs);
std::string serialize_schedule_csv(const Schedule& schedule, std::span<const Job> jobs, double utilization);

} // namespace greenmeter::sched
