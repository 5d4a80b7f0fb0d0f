#include "greenmeter/error.hpp"
#include "greenmeter/store.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <random>

using namespace greenmeter;
using namespace greenmeter::store;

namespace {

class StoreTest : public ::testing::Test {
protected:
    void SetUp() override
    {
        root_ = fs::temp_directory_path() /
                ("greenmeter-store-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(root_);
    }
    void TearDown() override { fs::remove_all(root_); }

    fs::path root_;
};

sim::ExperimentRecord random_record(std::mt19937_64& rng, const std::string& id)
{
    const sim::WorkloadKind kinds[] = {sim::WorkloadKind::idle,    sim::WorkloadKind::cpu_spin,
                                       sim::WorkloadKind::mem_cycle, sim::WorkloadKind::disk_io,
                                       sim::WorkloadKind::net_transfer, sim::WorkloadKind::stress_composite};
    sim::Flavor flavor{rng() % 2 ? "m1.small" : "m1.large", 1 + static_cast<int>(rng() % 8),
                       std::uniform_real_distribution<double>(0.5, 64.0)(rng),
                       std::uniform_real_distribution<double>(1.0, 500.0)(rng)};
    const auto duration = 10 + static_cast<std::int64_t>(rng() % 20);
    auto w = sim::default_workload(kinds[rng() % 6]);
    w.duration_seconds = duration;
    sim::HostModel host;
    host.noise_sigma_watts = std::uniform_real_distribution<double>(0.0, 3.0)(rng);
    host.meter_step_watts = rng() % 2 ? 4.0 : 0.0;
    sim::SimOptions opts;
    opts.idle_padding_seconds = static_cast<std::int64_t>(rng() % 5);
    sim::ExperimentRecord rec;
    if (rng() % 4 == 0) {
        auto w2 = sim::default_workload(kinds[rng() % 6]);
        w2.duration_seconds = duration;
        rec = sim::run_mix(host, {{flavor, w}, {sim::m1_small(), w2}}, rng(), duration, opts);
    } else {
        rec = sim::run_experiment(flavor, w, host, rng(), duration, opts);
    }
    rec.id = id;
    return rec;
}

sim::ExperimentRecord small_record(sim::WorkloadKind kind, const std::string& id, const std::string& flavor = "m1.small")
{
    auto w = sim::default_workload(kind);
    w.duration_seconds = 10;
    auto f = sim::m1_small();
    f.name = flavor;
    auto rec = sim::run_experiment(f, w, {}, 1, 10);
    rec.id = id;
    return rec;
}

SaveOptions at(std::int64_t created)
{
    SaveOptions o;
    o.created_epoch = created;
    return o;
}

} // namespace

TEST_F(StoreTest, SaveThenLoadIsIdentical)
{
    const auto rec = small_record(sim::WorkloadKind::cpu_spin, "run-1");
    const auto m = save_experiment(root_, rec, at(5));
    EXPECT_EQ(m.id, "run-1");
    EXPECT_EQ(m.created_epoch, 5);
    EXPECT_TRUE(has_experiment(root_, "run-1"));
    EXPECT_EQ(load_experiment(root_, "run-1"), rec);
    EXPECT_TRUE(fs::exists(root_ / "experiments" / "run-1" / "resources.csv"));
    EXPECT_TRUE(fs::exists(root_ / "experiments" / "run-1" / "power.log"));
    EXPECT_TRUE(fs::exists(root_ / "experiments" / "run-1" / "marks.txt"));
}

TEST_F(StoreTest, DuplicateIdConflicts)
{
    const auto rec = small_record(sim::WorkloadKind::idle, "dup");
    save_experiment(root_, rec);
    try {
        save_experiment(root_, rec);
        ADD_FAILURE();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::conflict);
    }
    EXPECT_EQ(load_experiment(root_, "dup"), rec);
}

TEST_F(StoreTest, RejectsBadIdsAndMissingEntries)
{
    EXPECT_FALSE(valid_id(""));
    EXPECT_FALSE(valid_id(".hidden"));
    EXPECT_FALSE(valid_id("a/b"));
    EXPECT_TRUE(valid_id("cpu_spin-s42.v2"));
    EXPECT_THROW(save_experiment(root_, small_record(sim::WorkloadKind::idle, "../escape")), Error);
    EXPECT_THROW(load_experiment(root_, "absent"), Error);
    EXPECT_FALSE(has_experiment(root_, "absent"));
}

TEST_F(StoreTest, RandomRecordsRoundTrip)
{
    std::mt19937_64 rng(77);
    for (int i = 0; i < 100; ++i) {
        const auto rec = random_record(rng, "r" + std::to_string(i));
        save_experiment(root_, rec, at(i));
        ASSERT_EQ(load_experiment(root_, rec.id), rec) << rec.id;
    }
    EXPECT_EQ(query(root_).size(), 100u);
}

TEST_F(StoreTest, QueryMatchesFullScan)
{
    std::mt19937_64 rng(5);
    std::vector<ExperimentManifest> all;
    for (int i = 0; i < 40; ++i) {
        const auto rec = random_record(rng, "q" + std::to_string(i));
        all.push_back(save_experiment(root_, rec, at(static_cast<std::int64_t>(rng() % 10))));
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        return std::tie(a.created_epoch, a.id) < std::tie(b.created_epoch, b.id);
    });
    const std::optional<std::string> flavors[] = {std::nullopt, "m1.small", "m1.large", "none"};
    const std::optional<sim::WorkloadKind> kinds[] = {std::nullopt, sim::WorkloadKind::cpu_spin,
                                                      sim::WorkloadKind::idle, sim::WorkloadKind::disk_io};
    for (const auto& f : flavors) {
        for (const auto& k : kinds) {
            std::vector<std::string> expected;
            for (const auto& m : all) {
                if ((!f || m.flavor.name == *f) && (!k || m.workload.kind == *k)) {
                    expected.push_back(m.id);
                }
            }
            std::vector<std::string> got;
            for (const auto& m : query(root_, {f, k})) {
                got.push_back(m.id);
            }
            EXPECT_EQ(got, expected);
        }
    }
}

TEST_F(StoreTest, QueryByWorkloadSubset)
{
    save_experiment(root_, small_record(sim::WorkloadKind::cpu_spin, "a"), at(1));
    save_experiment(root_, small_record(sim::WorkloadKind::disk_io, "b"), at(2));
    save_experiment(root_, small_record(sim::WorkloadKind::cpu_spin, "c"), at(3));
    const auto r = query(root_, {std::nullopt, sim::WorkloadKind::cpu_spin});
    ASSERT_EQ(r.size(), 2u);
    EXPECT_EQ(r[0].id, "a");
    EXPECT_EQ(r[1].id, "c");
    EXPECT_THROW(query(root_ / "nowhere"), Error);
}

TEST_F(StoreTest, FailedSaveLeavesNoTrace)
{
    const auto rec = small_record(sim::WorkloadKind::mem_cycle, "crashy");
    SaveOptions opts;
    opts.before_commit = [](const fs::path& staging) {
        EXPECT_TRUE(fs::exists(staging / "power.log"));
        throw std::runtime_error("simulated crash");
    };
    EXPECT_THROW(save_experiment(root_, rec, opts), std::runtime_error);
    EXPECT_FALSE(has_experiment(root_, "crashy"));
    EXPECT_TRUE(query(root_).empty());
    save_experiment(root_, rec);
    EXPECT_EQ(load_experiment(root_, "crashy"), rec);
}

TEST_F(StoreTest, StrayStagingDirectoryIsIgnored)
{
    save_experiment(root_, small_record(sim::WorkloadKind::idle, "kept"), at(1));
    const auto stray = root_ / "experiments" / ".staging-half";
    fs::create_directories(stray);
    std::ofstream(stray / "power.log") << "1 100\n";
    const auto r = query(root_);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0].id, "kept");
}

TEST_F(StoreTest, ModelsRoundTripAtFullPrecision)
{
    power::PowerModel m;
    m.p_static_watts = 100.0 / 3.0;
    m.beta = {35.123456789012345, 0.1, 1e-300, 26.0};
    m.ridge_lambda = 1e-8;
    m.residual_rmse_watts = 1.2345678901234567;
    m.r_squared = 0.98765432109876543;
    m.n_samples = 480;
    save_model(root_, "default", m);
    EXPECT_TRUE(has_model(root_, "default"));
    EXPECT_EQ(load_power_model(root_, "default"), m);

    std::ifstream in(root_ / "models" / "default");
    std::string text((std::istreambuf_iterator<char>(in)), {});
    EXPECT_NE(text.find("p_static=33.333333333333336"), std::string::npos) << text;

    power::BayesClassifier clf;
    clf.classes.push_back({"a", 0.25, {0.1, 0.2, 0.3, 0.4}, {1e-6, 0.01, 0.02, 0.03}, 35.5, 10});
    clf.classes.push_back({"b", 0.75, {0.9, 0.8, 0.7, 0.6}, {0.04, 0.05, 0.06, 0.07}, 9.25, 30});
    save_model(root_, "default.bayes", clf);
    EXPECT_EQ(load_bayes_classifier(root_, "default.bayes"), clf);
    EXPECT_THROW(load_power_model(root_, "default.bayes"), Error);
    EXPECT_THROW(load_power_model(root_, "missing"), Error);
}

TEST_F(StoreTest, ManifestVersionChecked)
{
    save_experiment(root_, small_record(sim::WorkloadKind::idle, "old"), at(1));
    const auto path = root_ / "experiments" / "old" / "manifest";
    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)), {});
    in.close();
    const auto pos = text.find("version=v1");
    ASSERT_NE(pos, std::string::npos);
    text.replace(pos, 10, "version=v9");
    std::ofstream(path) << text;
    try {
        load_experiment(root_, "old");
        ADD_FAILURE();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::version);
    }
}
