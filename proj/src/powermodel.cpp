#include "greenmeter/powermodel.hpp"

#include "greenmeter/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>

namespace greenmeter::power {

namespace {

constexpr std::size_t n_params = 5; // intercept + 4 betas
using Vec = std::array<double, n_params>;
using Mat = std::array<Vec, n_params>;

Vec design_row(const FeatureVector& fv) { return {1.0, fv.cpu, fv.mem, fv.disk, fv.net}; }

// Cholesky solve of a symmetric system. Fails when a pivot drops to or below
// `pivot_floor`.
std::optional<Vec> cholesky_solve(const Mat& a, const Vec& b, double pivot_floor)
{
    Mat l{};
    for (std::size_t j = 0; j < n_params; ++j) {
        double d = a[j][j];
        for (std::size_t k = 0; k < j; ++k) {
            d -= l[j][k] * l[j][k];
        }
        if (!(d > pivot_floor)) {
            return std::nullopt;
        }
        l[j][j] = std::sqrt(d);
        for (std::size_t i = j + 1; i < n_params; ++i) {
            double s = a[i][j];
            for (std::size_t k = 0; k < j; ++k) {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = s / l[j][j];
        }
    }
    Vec y{};
    for (std::size_t i = 0; i < n_params; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    Vec x{};
    for (std::size_t i = n_params; i-- > 0;) {
        double s = y[i];
        for (std::size_t k = i + 1; k < n_params; ++k) {
            s -= l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    return x;
}

std::optional<Vec> solve_penalized(const Mat& xtx, const Vec& xty, double lambda, double pivot_floor)
{
    Mat a = xtx;
    for (std::size_t j = 1; j < n_params; ++j) {
        a[j][j] += lambda;
    }
    auto theta = cholesky_solve(a, xty, pivot_floor);
    if (!theta) {
        return std::nullopt;
    }
    // One round of iterative refinement.
    Vec residual = xty;
    for (std::size_t i = 0; i < n_params; ++i) {
        for (std::size_t k = 0; k < n_params; ++k) {
            residual[i] -= a[i][k] * (*theta)[k];
        }
    }
    if (auto delta = cholesky_solve(a, residual, pivot_floor)) {
        for (std::size_t i = 0; i < n_params; ++i) {
            (*theta)[i] += (*delta)[i];
        }
    }
    return theta;
}

void check_features(const FeatureVector& fv)
{
    for (double v : fv.as_array()) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
            throw Error(Errc::data, "feature components must lie in [0,1]");
        }
    }
}

double mean_of(const std::vector<double>& values)
{
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    return sum / static_cast<double>(values.size());
}

std::vector<double> idle_values(const ts::TimeSeries& power, const ingest::ExperimentMarks& marks)
{
    std::vector<double> out;
    for (const auto& s : power.samples()) {
        if (s.epoch < marks.start_epoch || s.epoch > marks.end_epoch) {
            out.push_back(s.value);
        }
    }
    return out;
}

} // namespace

double estimate_static(const ts::TimeSeries& power, const ingest::ExperimentMarks& marks)
{
    auto idle = idle_values(power, marks);
    if (idle.size() < min_idle_samples) {
        throw Error(Errc::estimation, "only " + std::to_string(idle.size()) +
                                          " power samples outside the run marks (need " +
                                          std::to_string(min_idle_samples) + "); supply an idle record");
    }
    return mean_of(idle);
}

double estimate_static(const ts::TimeSeries& idle_power)
{
    if (idle_power.size() < min_idle_samples) {
        throw Error(Errc::estimation, "idle record holds " + std::to_string(idle_power.size()) +
                                          " samples (need " + std::to_string(min_idle_samples) + ")");
    }
    std::vector<double> values;
    for (const auto& s : idle_power.samples()) {
        values.push_back(s.value);
    }
    return mean_of(values);
}

std::vector<WindowFeature> extract_features(const sim::ExperimentRecord& record, double p_static_watts,
                                            const ExtractOptions& options)
{
    if (options.window_seconds < 1) {
        throw Error(Errc::configuration, "window must be at least one second");
    }
    const auto aligned = ts::align(record.resources, record.power, options.max_gap_seconds);
    if (aligned.empty()) {
        throw Error(Errc::extraction, "record '" + record.id + "' has no aligned resource/power samples");
    }

    const auto start = record.marks.start_epoch;
    const auto end = record.marks.end_epoch;
    const auto w = options.window_seconds;

    struct Acc {
        std::array<double, 4> u{};
        double watts = 0.0;
        std::size_t n = 0;
        std::int64_t first = 0;
        std::int64_t last = 0;
        bool inside = false;
    };
    // Keyed by (region, window index); region 0 precedes the run, 1 is the
    // run itself, 2 follows it.
    std::map<std::pair<int, std::int64_t>, Acc> windows;
    for (const auto& s : aligned) {
        std::pair<int, std::int64_t> key;
        if (s.epoch < start) {
            key = {0, (start - 1 - s.epoch) / w};
        } else if (s.epoch < end) {
            const auto idx = (s.epoch - start) / w;
            if (start + (idx + 1) * w > end) {
                continue;
            }
            key = {1, idx};
        } else if (s.epoch > end) {
            key = {2, (s.epoch - end - 1) / w};
        } else {
            continue;
        }
        auto& acc = windows[key];
        const auto u = sim::utilization_from_readings(s.resource_values, options.normalization).as_array();
        if (acc.n == 0) {
            acc.first = s.epoch;
            acc.inside = key.first == 1;
        }
        for (std::size_t r = 0; r < 4; ++r) {
            acc.u[r] += u[r];
        }
        acc.watts += s.power_watts;
        acc.last = s.epoch;
        ++acc.n;
    }
    if (windows.empty()) {
        throw Error(Errc::extraction, "record '" + record.id + "' yields no complete window");
    }

    std::vector<WindowFeature> out;
    out.reserve(windows.size());
    for (const auto& [key, acc] : windows) {
        const double n = static_cast<double>(acc.n);
        WindowFeature f;
        f.features = FeatureVector::from_array({acc.u[0] / n, acc.u[1] / n, acc.u[2] / n, acc.u[3] / n});
        f.mean_power_watts = acc.watts / n;
        f.dynamic_watts = std::max(0.0, f.mean_power_watts - p_static_watts);
        f.first_epoch = acc.first;
        f.last_epoch = acc.last;
        f.samples = acc.n;
        f.inside_run = acc.inside;
        out.push_back(f);
    }
    std::sort(out.begin(), out.end(),
              [](const WindowFeature& a, const WindowFeature& b) { return a.first_epoch < b.first_epoch; });
    return out;
}

PowerModel fit(std::span<const TrainingPoint> data, double ridge_lambda)
{
    if (data.size() < min_fit_samples) {
        throw Error(Errc::fit, "need at least " + std::to_string(min_fit_samples) + " points, got " +
                                   std::to_string(data.size()));
    }
    if (!std::isfinite(ridge_lambda) || ridge_lambda < 0.0) {
        throw Error(Errc::fit, "ridge lambda must be finite and non-negative");
    }
    Mat xtx{};
    Vec xty{};
    for (const auto& p : data) {
        check_features(p.features);
        if (!std::isfinite(p.watts)) {
            throw Error(Errc::data, "non-finite power target");
        }
        const auto row = design_row(p.features);
        for (std::size_t i = 0; i < n_params; ++i) {
            xty[i] += row[i] * p.watts;
            for (std::size_t k = 0; k < n_params; ++k) {
                xtx[i][k] += row[i] * row[k];
            }
        }
    }

    double max_diag = 0.0;
    for (std::size_t i = 0; i < n_params; ++i) {
        max_diag = std::max(max_diag, xtx[i][i]);
    }

    double lambda = ridge_lambda;
    // An unpenalized solve treats pivots at round-off level as rank
    // deficiency; a penalized one only needs positive pivots.
    auto theta = solve_penalized(xtx, xty, lambda, lambda == 0.0 ? 1e-12 * max_diag : 0.0);
    if (!theta && lambda == 0.0) {
        lambda = ridge_fallback_lambda;
        theta = solve_penalized(xtx, xty, lambda, 0.0);
    }
    if (!theta) {
        throw Error(Errc::fit, "normal equations are singular");
    }

    PowerModel model;
    model.p_static_watts = (*theta)[0];
    for (std::size_t r = 0; r < 4; ++r) {
        model.beta[r] = (*theta)[r + 1];
    }
    model.ridge_lambda = lambda;
    model.n_samples = static_cast<std::int64_t>(data.size());

    double mean_y = 0.0;
    for (const auto& p : data) {
        mean_y += p.watts;
    }
    mean_y /= static_cast<double>(data.size());
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (const auto& p : data) {
        const auto row = design_row(p.features);
        double fitted = 0.0;
        for (std::size_t i = 0; i < n_params; ++i) {
            fitted += row[i] * (*theta)[i];
        }
        ss_res += (p.watts - fitted) * (p.watts - fitted);
        ss_tot += (p.watts - mean_y) * (p.watts - mean_y);
    }
    model.residual_rmse_watts = std::sqrt(ss_res / static_cast<double>(data.size()));
    if (ss_tot > 0.0) {
        model.r_squared = 1.0 - ss_res / ss_tot;
    } else {
        // Constant targets: a perfect fit explains everything there is.
        model.r_squared = ss_res <= 1e-18 * (1.0 + mean_y * mean_y) ? 1.0 : 0.0;
    }
    return model;
}

double predict(const PowerModel& model, const FeatureVector& fv)
{
    if (!model.fitted()) {
        throw Error(Errc::usage, "power model has not been fitted");
    }
    check_features(fv);
    const auto u = fv.as_array();
    double dynamic = 0.0;
    for (std::size_t r = 0; r < 4; ++r) {
        dynamic += model.beta[r] * u[r];
    }
    return model.p_static_watts + std::max(0.0, dynamic);
}

TrainResult train(std::span<const sim::ExperimentRecord> records, const TrainOptions& options)
{
    if (records.empty()) {
        throw Error(Errc::fit, "no experiments to train on");
    }
    std::vector<double> idle;
    for (const auto& rec : records) {
        auto v = idle_values(rec.power, rec.marks);
        idle.insert(idle.end(), v.begin(), v.end());
    }
    if (idle.size() < min_idle_samples) {
        throw Error(Errc::estimation, "only " + std::to_string(idle.size()) +
                                          " idle power samples across the selected experiments (need " +
                                          std::to_string(min_idle_samples) + "); supply an idle record");
    }

    TrainResult result;
    result.static_estimate_watts = mean_of(idle);

    std::vector<TrainingPoint> points;
    for (const auto& rec : records) {
        auto windows = extract_features(rec, result.static_estimate_watts, options.extract);
        for (const auto& w : windows) {
            points.push_back({w.features, w.mean_power_watts});
        }
        result.windows.insert(result.windows.end(), windows.begin(), windows.end());
    }
    result.model = fit(points, options.ridge_lambda);

    const double gap = result.model.p_static_watts - result.static_estimate_watts;
    if (std::abs(gap) > static_discrepancy_warn_watts) {
        result.warnings.push_back("fitted intercept " + format_real(result.model.p_static_watts) +
                                  " W differs from idle estimate " + format_real(result.static_estimate_watts) +
                                  " W by more than " + format_real(static_discrepancy_warn_watts) + " W");
    }
    return result;
}

KvDoc to_document(const PowerModel& model)
{
    KvDoc doc;
    doc.set("format", std::string("powermodel"));
    doc.set("version", std::string("v1"));
    doc.set("p_static", model.p_static_watts);
    doc.set("beta_cpu", model.beta[0]);
    doc.set("beta_mem", model.beta[1]);
    doc.set("beta_disk", model.beta[2]);
    doc.set("beta_net", model.beta[3]);
    doc.set("lambda", model.ridge_lambda);
    doc.set("rmse", model.residual_rmse_watts);
    doc.set("r2", model.r_squared);
    doc.set_int("n", model.n_samples);
    return doc;
}

PowerModel power_model_from_document(const KvDoc& doc)
{
    if (doc.get("format") != "powermodel") {
        throw Error(Errc::format, "document is a '" + doc.get("format") + "', not a powermodel");
    }
    if (doc.get("version") != "v1") {
        throw Error(Errc::version, "unsupported powermodel version '" + doc.get("version") + "'");
    }
    PowerModel m;
    m.p_static_watts = doc.get_real("p_static");
    m.beta = {doc.get_real("beta_cpu"), doc.get_real("beta_mem"), doc.get_real("beta_disk"),
              doc.get_real("beta_net")};
    m.ridge_lambda = doc.get_real("lambda");
    m.residual_rmse_watts = doc.get_real("rmse");
    m.r_squared = doc.get_real("r2");
    m.n_samples = doc.get_int("n");
    return m;
}

} // namespace greenmeter::power
