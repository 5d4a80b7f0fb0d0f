#include "greenmeter/cli.hpp"

#include "greenmeter/bayes.hpp"
#include "greenmeter/error.hpp"
#include "greenmeter/ingest.hpp"
#include "greenmeter/powermodel.hpp"
#include "greenmeter/scheduler.hpp"
#include "greenmeter/simcloud.hpp"
#include "greenmeter/store.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

namespace greenmeter::cli {

namespace {

namespace fs = std::filesystem;

const std::vector<std::string> workload_names = {"idle",    "cpu_spin",     "mem_cycle",
                                                 "disk_io", "net_transfer", "stress_composite"};

struct RunConfig {
    std::string store = "greenmeter-store";
    std::uint64_t seed = 42;
    std::int64_t duration = 600;

    std::string flavor = "m1.small";
    std::optional<int> vcpus;
    std::optional<double> mem_gb;
    std::optional<double> disk_gb;

    std::string workload;
    std::vector<std::string> vms;
    std::optional<int> cpu_threads;
    std::optional<int> io_threads;
    std::optional<int> vm_threads;
    std::optional<std::int64_t> vm_bytes;
    std::optional<double> net_rate;

    std::optional<double> static_watts;
    std::optional<double> noise_sigma;
    std::optional<std::int64_t> meter_period;
    bool no_quantize = false;

    std::string id;
    std::string resources_path;
    std::string power_path;
    std::string marks_path;

    std::string filter_workload;
    std::string filter_flavor;
    std::int64_t window = 5;
    double lambda = 0.0;
    std::string model = "default";

    double cpu = 0.0;
    double mem = 0.0;
    double disk = 0.0;
    double net = 0.0;
    std::string experiment;

    std::string jobs_path;
    std::string forecast_path;
    double cap = 100.0;
    bool exact = false;
    std::string out_path;
    std::int64_t slot_seconds = 60;
    std::string out_dir;
};

// Raised for flag combinations CLI11 cannot express; maps to exit 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_input(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(Errc::storage, "cannot read " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Parses `path` with `parse`, prefixing errors with the file name.
template <typename Parse>
auto parse_file(const std::string& path, Parse parse)
{
    const auto text = read_input(path);
    try {
        return parse(text);
    } catch (const Error& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

void write_output(const fs::path& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) {
        throw Error(Errc::storage, "cannot write " + path.string());
    }
}

fs::path store_root(const RunConfig& cfg)
{
    if (const char* env = std::getenv(store_env_var); env != nullptr && *env != '\0') {
        return env;
    }
    return cfg.store;
}

sim::Flavor make_flavor(const RunConfig& cfg)
{
    sim::Flavor f = sim::m1_small();
    if (cfg.flavor != f.name && !(cfg.vcpus && cfg.mem_gb && cfg.disk_gb)) {
        throw UsageError("unknown flavor '" + cfg.flavor + "'; give --vcpus, --mem-gb and --disk-gb to define it");
    }
    f.name = cfg.flavor;
    f.vcpus = cfg.vcpus.value_or(f.vcpus);
    f.mem_gb = cfg.mem_gb.value_or(f.mem_gb);
    f.disk_gb = cfg.disk_gb.value_or(f.disk_gb);
    return f;
}

sim::WorkloadKind kind_of(const std::string& name)
{
    auto kind = sim::parse_workload_kind(name);
    if (!kind) {
        throw UsageError("unknown workload '" + name + "'");
    }
    return *kind;
}

sim::WorkloadSpec make_workload(const RunConfig& cfg, sim::WorkloadKind kind)
{
    auto w = sim::default_workload(kind);
    w.cpu_threads = cfg.cpu_threads.value_or(w.cpu_threads);
    w.io_threads = cfg.io_threads.value_or(w.io_threads);
    w.vm_threads = cfg.vm_threads.value_or(w.vm_threads);
    w.vm_bytes = cfg.vm_bytes.value_or(w.vm_bytes);
    w.net_rate_bytes_per_sec = cfg.net_rate.value_or(w.net_rate_bytes_per_sec);
    w.duration_seconds = cfg.duration;
    return w;
}

sim::HostModel make_host(const RunConfig& cfg)
{
    sim::HostModel h;
    h.static_watts = cfg.static_watts.value_or(h.static_watts);
    h.noise_sigma_watts = cfg.noise_sigma.value_or(h.noise_sigma_watts);
    h.meter_period_seconds = cfg.meter_period.value_or(h.meter_period_seconds);
    if (cfg.no_quantize) {
        h.meter_step_watts = 0.0;
    }
    return h;
}

// First free id of the form base, base-2, base-3, ...
std::string free_id(const fs::path& root, const std::string& base)
{
    if (!store::has_experiment(root, base)) {
        return base;
    }
    for (int n = 2;; ++n) {
        auto candidate = base + "-" + std::to_string(n);
        if (!store::has_experiment(root, candidate)) {
            return candidate;
        }
    }
}

int persist(const RunConfig& cfg, sim::ExperimentRecord rec, std::ostream& out)
{
    const auto root = store_root(cfg);
    std::error_code ec;
    fs::create_directories(root, ec);
    rec.id = cfg.id.empty() ? free_id(root, rec.id) : cfg.id;
    store::save_experiment(root, rec);
    out << rec.id << "\n";
    return exit_ok;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out)
{
    const auto flavor = make_flavor(cfg);
    const auto workload = make_workload(cfg, kind_of(cfg.workload));
    auto rec = sim::run_experiment(flavor, workload, make_host(cfg), cfg.seed, cfg.duration);
    return persist(cfg, std::move(rec), out);
}

int cmd_mix(const RunConfig& cfg, std::ostream& out)
{
    const auto flavor = make_flavor(cfg);
    std::vector<sim::MixEntry> vms;
    for (const auto& name : cfg.vms) {
        vms.push_back({flavor, make_workload(cfg, kind_of(name))});
    }
    auto rec = sim::run_mix(make_host(cfg), vms, cfg.seed, cfg.duration);
    return persist(cfg, std::move(rec), out);
}

int cmd_ingest(const RunConfig& cfg, std::ostream& out)
{
    sim::ExperimentRecord rec;
    rec.id = cfg.id;
    rec.flavor = make_flavor(cfg);
    rec.resources = parse_file(cfg.resources_path, ingest::parse_resource_csv);
    rec.power = parse_file(cfg.power_path, ingest::parse_power_log);
    rec.marks = parse_file(cfg.marks_path, ingest::parse_marks);
    rec.workload = sim::default_workload(kind_of(cfg.workload));
    rec.workload.duration_seconds = std::max<std::int64_t>(1, rec.marks.end_epoch - rec.marks.start_epoch);
    return persist(cfg, std::move(rec), out);
}

std::vector<sim::ExperimentRecord> load_matching(const fs::path& root, const RunConfig& cfg)
{
    store::QueryFilter filter;
    if (!cfg.filter_workload.empty()) {
        filter.workload = kind_of(cfg.filter_workload);
    }
    if (!cfg.filter_flavor.empty()) {
        filter.flavor = cfg.filter_flavor;
    }
    std::vector<sim::ExperimentRecord> records;
    for (const auto& m : store::query(root, filter)) {
        records.push_back(store::load_experiment(root, m.id));
    }
    return records;
}

power::ExtractOptions extract_options(const RunConfig& cfg)
{
    power::ExtractOptions opts;
    opts.window_seconds = cfg.window;
    return opts;
}

std::string bayes_name(const std::string& model) { return model + ".bayes"; }

int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err)
{
    const auto root = store_root(cfg);
    auto records = load_matching(root, cfg);
    if (records.empty()) {
        err << "no experiments match the given filters in " << root.string() << "\n";
        return exit_failure;
    }
    power::TrainOptions opts;
    opts.extract = extract_options(cfg);
    opts.ridge_lambda = cfg.lambda;
    auto result = power::train(records, opts);
    for (const auto& w : result.warnings) {
        err << "warning: " << w << "\n";
    }
    store::save_model(root, cfg.model, result.model);

    const auto& m = result.model;
    out << "model=" << cfg.model << "\n"
        << "p_static=" << format_real(m.p_static_watts) << "\n"
        << "static_estimate=" << format_real(result.static_estimate_watts) << "\n"
        << "beta_cpu=" << format_real(m.beta[0]) << "\n"
        << "beta_mem=" << format_real(m.beta[1]) << "\n"
        << "beta_disk=" << format_real(m.beta[2]) << "\n"
        << "beta_net=" << format_real(m.beta[3]) << "\n"
        << "lambda=" << format_real(m.ridge_lambda) << "\n"
        << "rmse=" << format_real(m.residual_rmse_watts) << "\n"
        << "r2=" << format_real(m.r_squared) << "\n"
        << "n=" << m.n_samples << "\n";

    // Single-VM runs label their in-run windows with the workload kind.
    std::vector<power::LabeledWindow> labeled;
    for (const auto& rec : records) {
        if (!rec.mix.empty()) {
            continue;
        }
        for (const auto& w : power::extract_features(rec, result.static_estimate_watts, opts.extract)) {
            if (w.inside_run) {
                labeled.push_back({w.features, sim::to_string(rec.workload.kind), w.dynamic_watts});
            }
        }
    }
    try {
        auto clf = power::bayes_fit(labeled);
        store::save_model(root, bayes_name(cfg.model), clf);
        out << "classifier=" << bayes_name(cfg.model) << "\n";
    } catch (const Error& e) {
        if (e.code() != Errc::fit) {
            throw;
        }
        err << "note: classifier not trained: " << e.what() << "\n";
    }
    return exit_ok;
}

power::FeatureVector requested_features(const RunConfig& cfg, const fs::path& root, double p_static)
{
    if (cfg.experiment.empty()) {
        return {cfg.cpu, cfg.mem, cfg.disk, cfg.net};
    }
    const auto rec = store::load_experiment(root, cfg.experiment);
    std::array<double, 4> sum{};
    std::size_t n = 0;
    for (const auto& w : power::extract_features(rec, p_static, extract_options(cfg))) {
        if (!w.inside_run) {
            continue;
        }
        const auto f = w.features.as_array();
        for (std::size_t r = 0; r < 4; ++r) {
            sum[r] += f[r];
        }
        ++n;
    }
    if (n == 0) {
        throw Error(Errc::extraction, "experiment '" + cfg.experiment + "' has no in-run windows");
    }
    for (auto& v : sum) {
        v /= static_cast<double>(n);
    }
    return power::FeatureVector::from_array(sum);
}

int cmd_predict(const RunConfig& cfg, std::ostream& out, std::ostream& err)
{
    const auto root = store_root(cfg);
    if (!store::has_model(root, cfg.model)) {
        err << "no model '" << cfg.model << "' in " << root.string() << "; run train first\n";
        return exit_failure;
    }
    const auto model = store::load_power_model(root, cfg.model);
    const auto fv = requested_features(cfg, root, model.p_static_watts);
    const double watts = power::predict(model, fv);
    out << "predicted_watts=" << format_real(watts) << "\n"
        << "dynamic_watts=" << format_real(watts - model.p_static_watts) << "\n";
    return exit_ok;
}

int cmd_classify(const RunConfig& cfg, std::ostream& out, std::ostream& err)
{
    const auto root = store_root(cfg);
    const auto name = bayes_name(cfg.model);
    if (!store::has_model(root, name) || !store::has_model(root, cfg.model)) {
        err << "no classifier '" << name << "' in " << root.string() << "; run train first\n";
        return exit_failure;
    }
    const auto clf = store::load_bayes_classifier(root, name);
    const auto model = store::load_power_model(root, cfg.model);
    const auto fv = requested_features(cfg, root, model.p_static_watts);
    const auto c = power::bayes_classify(clf, fv);
    out << "class=" << c.label << "\n"
        << "posterior=" << format_real(c.posterior) << "\n"
        << "expected_dynamic_watts=" << format_real(c.expected_dynamic_watts) << "\n";
    return exit_ok;
}

int cmd_schedule(const RunConfig& cfg, std::ostream& out)
{
    const auto jobs = parse_file(cfg.jobs_path, sched::parse_jobs_csv);
    const auto forecast = parse_file(cfg.forecast_path, [&](std::string_view text) {
        return sched::parse_forecast_csv(text, cfg.slot_seconds);
    });

    const auto admission = sched::admit_coarse(jobs, cfg.cap);
    for (const auto& j : admission.rejected) {
        out << "rejected=" << j.id << " peak_watts=" << format_real(j.peak_watts) << "\n";
    }
    const auto schedule = cfg.exact ? sched::schedule_exact(admission.admitted, forecast, cfg.cap)
                                    : sched::schedule_greedy(admission.admitted, forecast, cfg.cap);
    for (const auto& id : schedule.unassigned) {
        out << "unassigned=" << id << "\n";
    }
    const double util = sched::green_utilization(schedule, admission.admitted, forecast);
    const auto csv = sched::serialize_schedule_csv(schedule, admission.admitted, util);
    if (cfg.out_path.empty()) {
        out << csv;
    } else {
        write_output(cfg.out_path, csv);
        out << "schedule=" << cfg.out_path << "\n";
    }
    out << "green_utilization=" << format_real(util) << "\n";
    return exit_ok;
}

int cmd_report(const RunConfig& cfg, std::ostream& out, std::ostream& err)
{
    const auto root = store_root(cfg);
    if (!store::has_experiment(root, cfg.experiment)) {
        err << "no experiment '" << cfg.experiment << "' in " << root.string() << "\n";
        return exit_failure;
    }
    const auto rec = store::load_experiment(root, cfg.experiment);
    const fs::path dir = cfg.out_dir.empty() ? fs::path("report-" + rec.id) : fs::path(cfg.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw Error(Errc::storage, "cannot create " + dir.string());
    }
    for (const auto& [name, series] : rec.resources) {
        const auto path = dir / (ts::to_string(name) + ".dat");
        write_output(path, ingest::serialize_power_log(series));
        out << path.string() << "\n";
    }
    const auto power_path = dir / "power.dat";
    write_output(power_path, ingest::serialize_power_log(rec.power));
    write_output(dir / "marks.txt", ingest::serialize_marks(rec.marks));
    out << power_path.string() << "\n";
    return exit_ok;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    RunConfig cfg;
    CLI::App app{"Simulate, ingest and model per-VM power; schedule against green-energy forecasts", "greenmeter"};
    app.require_subcommand(1, 1);
    app.add_option("--store", cfg.store, "Store root (GREENMETER_STORE takes precedence)");

    auto add_seed = [&](CLI::App* sub) { sub->add_option("--seed", cfg.seed, "RNG seed")->capture_default_str(); };
    auto add_flavor = [&](CLI::App* sub) {
        sub->add_option("--flavor", cfg.flavor, "Flavor name")->capture_default_str();
        sub->add_option("--vcpus", cfg.vcpus, "vCPUs of a custom flavor")->check(CLI::PositiveNumber);
        sub->add_option("--mem-gb", cfg.mem_gb, "Memory of a custom flavor")->check(CLI::PositiveNumber);
        sub->add_option("--disk-gb", cfg.disk_gb, "Disk of a custom flavor")->check(CLI::PositiveNumber);
    };
    auto add_run = [&](CLI::App* sub) {
        add_seed(sub);
        add_flavor(sub);
        sub->add_option("--duration", cfg.duration, "Run length in seconds")->capture_default_str();
        sub->add_option("--cpu-threads", cfg.cpu_threads);
        sub->add_option("--io-threads", cfg.io_threads);
        sub->add_option("--vm-threads", cfg.vm_threads);
        sub->add_option("--vm-bytes", cfg.vm_bytes);
        sub->add_option("--net-rate", cfg.net_rate, "Network transfer rate, bytes/s");
        sub->add_option("--static-watts", cfg.static_watts);
        sub->add_option("--noise-sigma", cfg.noise_sigma);
        sub->add_option("--meter-period", cfg.meter_period);
        sub->add_flag("--no-quantize", cfg.no_quantize, "Disable 4 W meter quantization");
        sub->add_option("--id", cfg.id, "Experiment id (default <kind>-s<seed>)");
    };
    auto add_features = [&](CLI::App* sub) {
        sub->add_option("--model", cfg.model, "Model name")->capture_default_str();
        sub->add_option("--cpu", cfg.cpu)->check(CLI::Range(0.0, 1.0));
        sub->add_option("--mem", cfg.mem)->check(CLI::Range(0.0, 1.0));
        sub->add_option("--disk", cfg.disk)->check(CLI::Range(0.0, 1.0));
        sub->add_option("--net", cfg.net)->check(CLI::Range(0.0, 1.0));
        sub->add_option("--experiment", cfg.experiment, "Use the mean in-run features of a stored experiment");
        sub->add_option("--window", cfg.window)->check(CLI::PositiveNumber)->capture_default_str();
    };

    auto* simulate = app.add_subcommand("simulate", "Simulate one VM run and store it");
    simulate->add_option("--workload", cfg.workload, "Workload kind")->required()->check(CLI::IsMember(workload_names));
    add_run(simulate);

    auto* mix = app.add_subcommand("mix", "Simulate several VMs sharing the host");
    mix->add_option("--vm", cfg.vms, "Workload kind of one VM (repeat)")->required()->check(CLI::IsMember(workload_names));
    add_run(mix);

    auto* ingest_cmd = app.add_subcommand("ingest", "Store externally recorded resource, power and marks files");
    ingest_cmd->add_option("--id", cfg.id)->required();
    ingest_cmd->add_option("--resources", cfg.resources_path)->required();
    ingest_cmd->add_option("--power", cfg.power_path)->required();
    ingest_cmd->add_option("--marks", cfg.marks_path)->required();
    ingest_cmd->add_option("--workload", cfg.workload)->required()->check(CLI::IsMember(workload_names));
    add_flavor(ingest_cmd);

    auto* train_cmd = app.add_subcommand("train", "Fit the power model (and workload classifier) on stored runs");
    train_cmd->add_option("--workload", cfg.filter_workload)->check(CLI::IsMember(workload_names));
    train_cmd->add_option("--flavor", cfg.filter_flavor);
    train_cmd->add_option("--window", cfg.window)->check(CLI::PositiveNumber)->capture_default_str();
    train_cmd->add_option("--lambda", cfg.lambda)->check(CLI::NonNegativeNumber)->capture_default_str();
    train_cmd->add_option("--model", cfg.model)->capture_default_str();

    auto* predict_cmd = app.add_subcommand("predict", "Predict host power for a feature vector");
    add_features(predict_cmd);
    auto* classify_cmd = app.add_subcommand("classify", "Classify a feature vector's workload kind");
    add_features(classify_cmd);

    auto* schedule_cmd = app.add_subcommand("schedule", "Place jobs against a green-power forecast");
    schedule_cmd->add_option("--jobs", cfg.jobs_path, "CSV job_id,predicted_watts,peak_watts,duration_slots")->required();
    schedule_cmd->add_option("--forecast", cfg.forecast_path, "CSV slot,green_watts")->required();
    schedule_cmd->add_option("--cap", cfg.cap, "Host cap in watts")->check(CLI::PositiveNumber)->capture_default_str();
    schedule_cmd->add_flag("--exact", cfg.exact, "Use exhaustive search (small instances)");
    schedule_cmd->add_option("--out", cfg.out_path, "Schedule CSV destination (stdout if absent)");
    schedule_cmd->add_option("--slot-seconds", cfg.slot_seconds)->check(CLI::PositiveNumber)->capture_default_str();

    auto* report_cmd = app.add_subcommand("report", "Write two-column plot data for a stored run");
    report_cmd->add_option("--experiment", cfg.experiment)->required();
    report_cmd->add_option("--out-dir", cfg.out_dir);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return exit_usage;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(cfg, out);
        if (mix->parsed()) return cmd_mix(cfg, out);
        if (ingest_cmd->parsed()) return cmd_ingest(cfg, out);
        if (train_cmd->parsed()) return cmd_train(cfg, out, err);
        if (predict_cmd->parsed()) return cmd_predict(cfg, out, err);
        if (classify_cmd->parsed()) return cmd_classify(cfg, out, err);
        if (schedule_cmd->parsed()) return cmd_schedule(cfg, out);
        if (report_cmd->parsed()) return cmd_report(cfg, out, err);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_failure;
    }
    return exit_usage;
}

} // namespace greenmeter::cli
