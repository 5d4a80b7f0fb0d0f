#include "greenmeter/error.hpp"
#include "greenmeter/kvdoc.hpp"
#include "greenmeter/scheduler.hpp"

namespace greenmeter::sched {

namespace {

constexpr std::string_view forecast_header = "slot,green_watts";
constexpr std::string_view jobs_header = "job_id,predicted_watts,peak_watts,duration_slots";
constexpr std::string_view schedule_header = "job_id,start_slot,predicted_watts,duration_slots";

std::vector<std::string_view> checked_lines(std::string_view text, std::string_view header)
{
    auto lines = split_lines(text);
    if (lines.empty() || lines[0] != header) {
        throw Error(Errc::format, 1, "expected header '" + std::string(header) + "'");
    }
    return lines;
}

} // namespace

GreenForecast parse_forecast_csv(std::string_view text, std::int64_t slot_seconds)
{
    auto lines = checked_lines(text, forecast_header);
    GreenForecast out;
    out.slot_seconds = slot_seconds;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        auto cols = split(lines[i], ',');
        auto slot = cols.size() == 2 ? parse_int(cols[0]) : std::nullopt;
        auto green = cols.size() == 2 ? parse_real(cols[1]) : std::nullopt;
        if (!slot || !green) {
            throw Error(Errc::format, i + 1, "expected '<slot>,<green_watts>'");
        }
        if (*slot != static_cast<std::int64_t>(out.green_watts.size())) {
            throw Error(Errc::format, i + 1, "slots must run 0,1,2,... without gaps");
        }
        if (*green < 0.0) {
            throw Error(Errc::format, i + 1, "green power must be non-negative");
        }
        out.green_watts.push_back(*green);
    }
    if (out.green_watts.empty()) {
        throw Error(Errc::format, 2, "forecast has no slots");
    }
    return out;
}

std::string serialize_forecast_csv(const GreenForecast& forecast)
{
    std::string out(forecast_header);
    out += '\n';
    for (std::size_t s = 0; s < forecast.green_watts.size(); ++s) {
        out += std::to_string(s) + "," + format_real(forecast.green_watts[s]) + "\n";
    }
    return out;
}

std::vector<Job> parse_jobs_csv(std::string_view text)
{
    auto lines = checked_lines(text, jobs_header);
    std::vector<Job> jobs;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto lineno = i + 1;
        auto cols = split(lines[i], ',');
        if (cols.size() != 4 || cols[0].empty()) {
            throw Error(Errc::format, lineno, "expected '<job_id>,<predicted_watts>,<peak_watts>,<duration_slots>'");
        }
        auto predicted = parse_real(cols[1]);
        auto peak = parse_real(cols[2]);
        auto duration = parse_int(cols[3]);
        if (!predicted || !peak || !duration) {
            throw Error(Errc::format, lineno, "non-numeric job field");
        }
        Job job{std::string(cols[0]), *predicted, *duration, *peak};
        try {
            validate(std::span<const Job>(&job, 1));
        } catch (const Error& e) {
            throw Error(Errc::format, lineno, e.what());
        }
        for (const auto& other : jobs) {
            if (other.id == job.id) {
                throw Error(Errc::duplicate, lineno, "job '" + job.id + "' listed twice");
            }
        }
        jobs.push_back(std::move(job));
    }
    return jobs;
}

std::string serialize_jobs_csv(std::span<const Job> jobs)
{
    std::string out(jobs_header);
    out += '\n';
    for (const auto& j : jobs) {
        out += j.id + "," + format_real(j.predicted_watts) + "," + format_real(j.peak_watts) + "," +
               std::to_string(j.duration_slots) + "\n";
    }
    return out;
}

std::string serialize_schedule_csv(const Schedule& schedule, std::span<const Job> jobs, double utilization)
{
    std::string out(schedule_header);
    out += '\n';
    for (const auto& [id, start] : schedule.assignments) {
        for (const auto& j : jobs) {
            if (j.id == id) {
                out += id + "," + std::to_string(start) + "," + format_real(j.predicted_watts) + "," +
                       std::to_string(j.duration_slots) + "\n";
            }
        }
    }
    out += "# green_utilization=" + format_real(utilization) + "\n";
    return out;
}

} // namespace greenmeter::sched
