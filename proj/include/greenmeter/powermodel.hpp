#pragma once

#include "greenmeter/ingest.hpp"
#include "greenmeter/kvdoc.hpp"
#include "greenmeter/simcloud.hpp"
#include "greenmeter/timeseries.hpp"
#include "greenmeter/utilization.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace greenmeter::power {

using FeatureVector = Utilization;

inline constexpr std::size_t min_fit_samples = 5;
inline constexpr std::size_t min_idle_samples = 30;
inline constexpr double ridge_fallback_lambda = 1e-8;
inline constexpr double static_discrepancy_warn_watts = 6.0;

// Linear power model: p_static + beta . u. The intercept is the static
// (no-VM) host power.
struct PowerModel {
    double p_static_watts = 0.0;
    std::array<double, 4> beta{}; // cpu, mem, disk, net
    double ridge_lambda = 0.0;    // lambda actually used by the solve
    double residual_rmse_watts = 0.0;
    double r_squared = 0.0;
    std::int64_t n_samples = 0;

    bool fitted() const noexcept { return n_samples >= static_cast<std::int64_t>(min_fit_samples); }
    bool operator==(const PowerModel&) const = default;
};

struct TrainingPoint {
    FeatureVector features;
    double watts = 0.0;
};

// Mean power over the samples outside [start, end]. Needs at least
// min_idle_samples of them.
double estimate_static(const ts::TimeSeries& power, const ingest::ExperimentMarks& marks);
// Mean power of a dedicated idle (no-VM) recording.
double estimate_static(const ts::TimeSeries& idle_power);

struct ExtractOptions {
    std::int64_t window_seconds = 5;
    std::int64_t max_gap_seconds = 1;
    Normalization normalization;
};

struct WindowFeature {
    FeatureVector features;     // component-wise mean utilization
    double mean_power_watts = 0.0;
    double dynamic_watts = 0.0; // max(0, mean power - p_static)
    std::int64_t first_epoch = 0;
    std::int64_t last_epoch = 0;
    std::size_t samples = 0;
    bool inside_run = false;    // window lies within [start, end)

    bool operator==(const WindowFeature&) const = default;
};

/// Aligns the record's resources to its power trace and averages them over
/// fixed windows. Windows tile [start, end) from the start mark and the idle
/// stretches outward from the marks; a window that would straddle a mark is
/// dropped, as is the sample at the end mark itself.
std::vector<WindowFeature> extract_features(const sim::ExperimentRecord& record, double p_static_watts,
                                            const ExtractOptions& options = {});

/// Least squares for [intercept, beta] with an L2 penalty on beta only.
/// A singular system at lambda = 0 is re-solved with ridge_fallback_lambda.
PowerModel fit(std::span<const TrainingPoint> data, double ridge_lambda = 0.0);

// p_static + max(0, beta . fv).
double predict(const PowerModel& model, const FeatureVector& fv);

struct TrainOptions {
    ExtractOptions extract;
    double ridge_lambda = 0.0;
};

struct TrainResult {
    PowerModel model;
    double static_estimate_watts = 0.0;
    std::vector<WindowFeature> windows;
    std::vector<std::string> warnings;
};

/// Static estimation, window extraction and regression over a set of
/// records. Each window contributes its mean absolute power; the free
/// intercept is compared with the idle-sample estimate afterwards.
TrainResult train(std::span<const sim::ExperimentRecord> records, const TrainOptions& options = {});

KvDoc to_document(const PowerModel& model);
PowerModel power_model_from_document(const KvDoc& doc);

} // namespace greenmeter::power
