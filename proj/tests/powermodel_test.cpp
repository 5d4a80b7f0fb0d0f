#include "greenmeter/error.hpp"
#include "greenmeter/powermodel.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace greenmeter;
using namespace greenmeter::power;

namespace {

Errc code_of(auto&& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an Error";
    return Errc::usage;
}

std::vector<sim::ExperimentRecord> training_records(std::uint64_t seed, std::int64_t duration = 600)
{
    std::vector<sim::ExperimentRecord> out;
    for (auto k : {sim::WorkloadKind::cpu_spin, sim::WorkloadKind::mem_cycle, sim::WorkloadKind::disk_io,
                   sim::WorkloadKind::net_transfer}) {
        auto w = sim::default_workload(k);
        w.duration_seconds = duration;
        out.push_back(sim::run_experiment(sim::m1_small(), w, {}, seed, duration));
    }
    return out;
}

ts::TimeSeries constant_series(std::int64_t first, std::size_t n, double v)
{
    ts::TimeSeries s(1);
    for (std::size_t i = 0; i < n; ++i) {
        s.append(first + static_cast<std::int64_t>(i), v);
    }
    return s;
}

} // namespace

TEST(StaticEstimate, ConstantTrace)
{
    const auto p = constant_series(0, 200, 100.0);
    EXPECT_EQ(estimate_static(p, {50, 150}), 100.0);
    EXPECT_EQ(estimate_static(p), 100.0);
}

TEST(StaticEstimate, UsesOnlySamplesOutsideMarks)
{
    ts::TimeSeries p(1);
    for (std::int64_t e = 0; e < 100; ++e) {
        p.append(e, e >= 40 && e <= 59 ? 500.0 : 80.0);
    }
    EXPECT_EQ(estimate_static(p, {40, 59}), 80.0);
}

TEST(StaticEstimate, SimulatedTraceWithinOneWatt)
{
    const auto rec = sim::run_experiment(sim::m1_small(), sim::default_workload(sim::WorkloadKind::cpu_spin), {}, 42,
                                         600);
    EXPECT_NEAR(estimate_static(rec.power, rec.marks), 100.0, 1.0);
}

TEST(StaticEstimate, TooFewIdleSamples)
{
    const auto p = constant_series(0, 100, 100.0);
    EXPECT_EQ(code_of([&] { estimate_static(p, {0, 99}); }), Errc::estimation);
    EXPECT_EQ(code_of([&] { estimate_static(p, {10, 80}); }), Errc::estimation);
    EXPECT_EQ(code_of([&] { estimate_static(constant_series(0, 29, 1.0)); }), Errc::estimation);
}

// Recomputes every window directly from the record by epoch lookup.
TEST(Extract, MatchesBruteForceWindows)
{
    auto w = sim::default_workload(sim::WorkloadKind::stress_composite);
    w.duration_seconds = 23; // not a multiple of the window
    const auto rec = sim::run_experiment(sim::m1_small(), w, {}, 3, 23);
    const double p_static = 100.0;
    const auto got = extract_features(rec, p_static);

    const Normalization norm;
    std::map<std::int64_t, double> power;
    for (const auto& s : rec.power.samples()) {
        power[s.epoch] = s.value;
    }
    auto util_at = [&](std::int64_t e) {
        std::map<ts::MetricName, double> readings;
        for (const auto& [name, s] : rec.resources) {
            for (const auto& x : s.samples()) {
                if (x.epoch == e) {
                    readings[name] = x.value;
                }
            }
        }
        return sim::utilization_from_readings(readings, norm);
    };
    const auto first = rec.power.samples().front().epoch;
    const auto last = rec.power.samples().back().epoch;
    const auto start = rec.marks.start_epoch;
    const auto end = rec.marks.end_epoch;

    std::vector<std::pair<std::int64_t, std::int64_t>> ranges; // inclusive
    for (auto hi = start - 1; hi >= first; hi -= 5) {
        ranges.emplace_back(std::max(first, hi - 4), hi);
    }
    for (auto lo = start; lo + 5 <= end; lo += 5) {
        ranges.emplace_back(lo, lo + 4);
    }
    for (auto lo = end + 1; lo <= last; lo += 5) {
        ranges.emplace_back(lo, std::min(last, lo + 4));
    }
    std::sort(ranges.begin(), ranges.end());
    ASSERT_EQ(got.size(), ranges.size());
    EXPECT_EQ(std::count_if(got.begin(), got.end(), [](const auto& f) { return f.inside_run; }), 4);

    for (std::size_t i = 0; i < ranges.size(); ++i) {
        const auto [lo, hi] = ranges[i];
        std::array<double, 4> u{};
        double watts = 0.0;
        for (auto e = lo; e <= hi; ++e) {
            const auto a = util_at(e).as_array();
            for (std::size_t r = 0; r < 4; ++r) {
                u[r] += a[r];
            }
            watts += power.at(e);
        }
        const double n = static_cast<double>(hi - lo + 1);
        const auto& f = got[i];
        EXPECT_EQ(f.first_epoch, lo);
        EXPECT_EQ(f.last_epoch, hi);
        EXPECT_EQ(f.samples, static_cast<std::size_t>(n));
        EXPECT_EQ(f.inside_run, lo >= start && hi < end);
        const auto fa = f.features.as_array();
        for (std::size_t r = 0; r < 4; ++r) {
            EXPECT_NEAR(fa[r], u[r] / n, 1e-12);
        }
        EXPECT_NEAR(f.mean_power_watts, watts / n, 1e-9);
        EXPECT_NEAR(f.dynamic_watts, std::max(0.0, watts / n - p_static), 1e-9);
    }
}

TEST(Extract, RejectsRecordWithoutOverlap)
{
    auto rec = sim::run_experiment(sim::m1_small(), sim::default_workload(sim::WorkloadKind::idle), {}, 1, 60);
    rec.power = constant_series(1, 10, 100.0);
    EXPECT_EQ(code_of([&] { extract_features(rec, 100.0); }), Errc::extraction);
}

TEST(Fit, InterceptOnlyFallsBackToRidge)
{
    std::vector<TrainingPoint> pts(8, TrainingPoint{{}, 12.0});
    const auto m = fit(pts);
    EXPECT_NEAR(m.p_static_watts, 12.0, 1e-9);
    EXPECT_EQ(m.ridge_lambda, ridge_fallback_lambda);
    for (double b : m.beta) {
        EXPECT_NEAR(b, 0.0, 1e-9);
    }
    EXPECT_EQ(m.r_squared, 1.0);
}

TEST(Fit, RepeatedPointFallsBackToRidge)
{
    std::vector<TrainingPoint> pts(10, TrainingPoint{{0.5, 0.25, 0.1, 0.9}, 150.0});
    const auto m = fit(pts);
    EXPECT_EQ(m.ridge_lambda, ridge_fallback_lambda);
    // The fallback system has condition number near 1e9.
    EXPECT_NEAR(predict(m, {0.5, 0.25, 0.1, 0.9}), 150.0, 1e-4);
}

TEST(Fit, ExactLinearRecovery)
{
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<TrainingPoint> pts;
    for (int i = 0; i < 50; ++i) {
        FeatureVector fv{u(rng), u(rng), u(rng), u(rng)};
        pts.push_back({fv, 90.0 + 30.0 * fv.cpu + 20.0 * fv.mem + 5.0 * fv.disk + 15.0 * fv.net});
    }
    const auto m = fit(pts);
    EXPECT_EQ(m.ridge_lambda, 0.0);
    EXPECT_LT(m.residual_rmse_watts, 1e-9);
    EXPECT_NEAR(m.p_static_watts, 90.0, 1e-9);
    EXPECT_NEAR(m.beta[0], 30.0, 1e-9);
    EXPECT_NEAR(m.beta[1], 20.0, 1e-9);
    EXPECT_NEAR(m.beta[2], 5.0, 1e-9);
    EXPECT_NEAR(m.beta[3], 15.0, 1e-9);
    EXPECT_NEAR(m.r_squared, 1.0, 1e-12);
    EXPECT_EQ(m.n_samples, 50);
}

TEST(Fit, ScalesWithTarget)
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 3.0);
    std::vector<TrainingPoint> pts;
    std::vector<TrainingPoint> scaled;
    for (int i = 0; i < 40; ++i) {
        FeatureVector fv{u(rng), u(rng), u(rng), u(rng)};
        const double y = 100.0 + 35.0 * fv.cpu + 26.0 * fv.mem + noise(rng);
        pts.push_back({fv, y});
        scaled.push_back({fv, 3.0 * y});
    }
    const auto a = fit(pts);
    const auto b = fit(scaled);
    EXPECT_NEAR(b.p_static_watts, 3.0 * a.p_static_watts, 1e-8);
    for (std::size_t r = 0; r < 4; ++r) {
        EXPECT_NEAR(b.beta[r], 3.0 * a.beta[r], 1e-8);
    }
    EXPECT_NEAR(b.residual_rmse_watts, 3.0 * a.residual_rmse_watts, 1e-8);
}

// At the optimum the gradient of SSE + lambda * |beta|^2 vanishes.
TEST(Fit, GradientVanishesAtSolution)
{
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 2.0);
    std::vector<TrainingPoint> pts;
    for (int i = 0; i < 60; ++i) {
        FeatureVector fv{u(rng), u(rng), u(rng), u(rng)};
        pts.push_back({fv, 100.0 + 35.0 * fv.cpu + 9.0 * fv.disk + noise(rng)});
    }
    for (double lambda : {0.0, 0.5, 10.0}) {
        const auto m = fit(pts, lambda);
        std::array<double, 5> grad{};
        for (const auto& p : pts) {
            const std::array<double, 5> row{1.0, p.features.cpu, p.features.mem, p.features.disk, p.features.net};
            double r = m.p_static_watts;
            for (std::size_t k = 0; k < 4; ++k) {
                r += m.beta[k] * row[k + 1];
            }
            r -= p.watts;
            for (std::size_t k = 0; k < 5; ++k) {
                grad[k] += 2.0 * r * row[k];
            }
        }
        for (std::size_t k = 0; k < 4; ++k) {
            grad[k + 1] += 2.0 * lambda * m.beta[k];
        }
        for (double g : grad) {
            EXPECT_NEAR(g, 0.0, 1e-7) << "lambda=" << lambda;
        }
    }
}

TEST(Fit, Rejections)
{
    std::vector<TrainingPoint> four(4, TrainingPoint{{0.1, 0.1, 0.1, 0.1}, 1.0});
    EXPECT_EQ(code_of([&] { fit(four); }), Errc::fit);
    std::vector<TrainingPoint> bad(6, TrainingPoint{{0.1, 0.1, 0.1, 0.1}, 1.0});
    bad[2].features.cpu = 1.5;
    EXPECT_EQ(code_of([&] { fit(bad); }), Errc::data);
    bad[2].features.cpu = 0.5;
    bad[3].watts = std::nan("");
    EXPECT_EQ(code_of([&] { fit(bad); }), Errc::data);
}

TEST(Predict, NeverBelowStatic)
{
    PowerModel m;
    m.p_static_watts = 100.0;
    m.beta = {-5.0, 2.0, 0.0, 0.0};
    m.n_samples = 10;
    EXPECT_EQ(predict(m, {1.0, 0.0, 0.0, 0.0}), 100.0);
    EXPECT_EQ(predict(m, {}), 100.0);
    EXPECT_EQ(predict(m, {0.0, 1.0, 0.0, 0.0}), 102.0);
    EXPECT_EQ(code_of([] { predict(PowerModel{}, {}); }), Errc::usage);
}

TEST(Train, RecoversHostCoefficients)
{
    const auto recs = training_records(42);
    const auto result = train(recs);
    const auto& m = result.model;
    EXPECT_NEAR(m.p_static_watts, 100.0, 2.0);
    EXPECT_NEAR(m.beta[0], 35.0, 3.5);
    EXPECT_NEAR(m.beta[1], 26.0, 2.6);
    EXPECT_NEAR(m.beta[2], 9.0, 0.9);
    EXPECT_NEAR(m.beta[3], 27.0, 2.7);
    EXPECT_NEAR(result.static_estimate_watts, 100.0, 1.0);
    EXPECT_TRUE(result.warnings.empty());
}

TEST(Train, HeldOutWindowRmse)
{
    const auto model = train(training_records(42)).model;
    double ss = 0.0;
    std::size_t n = 0;
    for (const auto& rec : training_records(1042, 300)) {
        for (const auto& w : extract_features(rec, model.p_static_watts)) {
            const double e = predict(model, w.features) - w.mean_power_watts;
            ss += e * e;
            ++n;
        }
    }
    EXPECT_LE(std::sqrt(ss / static_cast<double>(n)), 3.0);
}

TEST(Train, WarnsOnStaticDiscrepancy)
{
    auto recs = training_records(42, 120);
    // Shift the idle power and drop the idle resource readings, so the fit
    // only sees the run while the idle estimate moves by 20 W.
    for (auto& rec : recs) {
        for (auto& [name, series] : rec.resources) {
            ts::TimeSeries run(series.step_seconds());
            for (const auto& s : series.samples()) {
                if (s.epoch >= rec.marks.start_epoch && s.epoch < rec.marks.end_epoch) {
                    run.append(s.epoch, s.value);
                }
            }
            series = run;
        }
        ts::TimeSeries shifted(rec.power.step_seconds());
        for (const auto& s : rec.power.samples()) {
            const bool idle = s.epoch < rec.marks.start_epoch || s.epoch > rec.marks.end_epoch;
            shifted.append(s.epoch, idle ? s.value + 20.0 : s.value);
        }
        rec.power = shifted;
    }
    EXPECT_FALSE(train(recs).warnings.empty());
    EXPECT_EQ(code_of([] { train({}); }), Errc::fit);
}

TEST(Document, RoundTripsExactly)
{
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> d(-1e3, 1e3);
    for (int i = 0; i < 100; ++i) {
        PowerModel m;
        m.p_static_watts = d(rng);
        for (auto& b : m.beta) {
            b = d(rng);
        }
        m.ridge_lambda = std::abs(d(rng)) * 1e-7;
        m.residual_rmse_watts = std::abs(d(rng));
        m.r_squared = d(rng) / 1e3;
        m.n_samples = static_cast<std::int64_t>(rng() % 100000);
        ASSERT_EQ(power_model_from_document(KvDoc::parse(to_document(m).render())), m);
    }
}

TEST(Document, RejectsOtherVersions)
{
    auto doc = to_document(PowerModel{});
    doc.set("version", std::string("v999"));
    EXPECT_EQ(code_of([&] { power_model_from_document(doc); }), Errc::version);
    doc.set("version", std::string("v1"));
    doc.set("format", std::string("bayes"));
    EXPECT_EQ(code_of([&] { power_model_from_document(doc); }), Errc::format);
}
