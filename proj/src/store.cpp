#include "greenmeter/store.hpp"

#include "greenmeter/error.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>

namespace greenmeter::store {

namespace {

constexpr const char* manifest_name = "manifest";

fs::path experiments_dir(const fs::path& root) { return root / "experiments"; }
fs::path models_dir(const fs::path& root) { return root / "models"; }

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(Errc::storage, "cannot read " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) {
        throw Error(Errc::storage, "read failed for " + path.string());
    }
    return buf.str();
}

void write_file(const fs::path& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    out.flush();
    if (!out) {
        throw Error(Errc::storage, "cannot write " + path.string());
    }
}

void ensure_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw Error(Errc::storage, "cannot create " + dir.string() + ": " + ec.message());
    }
}

void check_root(const fs::path& root)
{
    std::error_code ec;
    if (!fs::is_directory(root, ec)) {
        throw Error(Errc::storage, "store root " + root.string() + " is not a readable directory");
    }
}

void put_flavor(KvDoc& doc, const std::string& prefix, const sim::Flavor& f)
{
    doc.set(prefix + "name", f.name);
    doc.set_int(prefix + "vcpus", f.vcpus);
    doc.set(prefix + "mem_gb", f.mem_gb);
    doc.set(prefix + "disk_gb", f.disk_gb);
}

sim::Flavor get_flavor(const KvDoc& doc, const std::string& prefix)
{
    return {doc.get(prefix + "name"), static_cast<int>(doc.get_int(prefix + "vcpus")), doc.get_real(prefix + "mem_gb"),
            doc.get_real(prefix + "disk_gb")};
}

void put_workload(KvDoc& doc, const std::string& prefix, const sim::WorkloadSpec& w)
{
    doc.set(prefix + "kind", sim::to_string(w.kind));
    doc.set_int(prefix + "cpu_threads", w.cpu_threads);
    doc.set_int(prefix + "io_threads", w.io_threads);
    doc.set_int(prefix + "vm_threads", w.vm_threads);
    doc.set_int(prefix + "vm_bytes", w.vm_bytes);
    doc.set_int(prefix + "duration_seconds", w.duration_seconds);
    doc.set(prefix + "net_rate_bytes_per_sec", w.net_rate_bytes_per_sec);
}

sim::WorkloadSpec get_workload(const KvDoc& doc, const std::string& prefix)
{
    auto kind = sim::parse_workload_kind(doc.get(prefix + "kind"));
    if (!kind) {
        throw Error(Errc::format, "unknown workload kind '" + doc.get(prefix + "kind") + "'");
    }
    sim::WorkloadSpec w;
    w.kind = *kind;
    w.cpu_threads = static_cast<int>(doc.get_int(prefix + "cpu_threads"));
    w.io_threads = static_cast<int>(doc.get_int(prefix + "io_threads"));
    w.vm_threads = static_cast<int>(doc.get_int(prefix + "vm_threads"));
    w.vm_bytes = doc.get_int(prefix + "vm_bytes");
    w.duration_seconds = doc.get_int(prefix + "duration_seconds");
    w.net_rate_bytes_per_sec = doc.get_real(prefix + "net_rate_bytes_per_sec");
    return w;
}

void put_host(KvDoc& doc, const sim::HostModel& h)
{
    doc.set("host.static_watts", h.static_watts);
    doc.set("host.beta_cpu", h.beta_cpu);
    doc.set("host.beta_mem", h.beta_mem);
    doc.set("host.beta_disk", h.beta_disk);
    doc.set("host.beta_net", h.beta_net);
    doc.set("host.dynamic_cap_watts", h.dynamic_cap_watts);
    doc.set("host.noise_sigma_watts", h.noise_sigma_watts);
    doc.set("host.meter_step_watts", h.meter_step_watts);
    doc.set_int("host.meter_period_seconds", h.meter_period_seconds);
}

sim::HostModel get_host(const KvDoc& doc)
{
    sim::HostModel h;
    h.static_watts = doc.get_real("host.static_watts");
    h.beta_cpu = doc.get_real("host.beta_cpu");
    h.beta_mem = doc.get_real("host.beta_mem");
    h.beta_disk = doc.get_real("host.beta_disk");
    h.beta_net = doc.get_real("host.beta_net");
    h.dynamic_cap_watts = doc.get_real("host.dynamic_cap_watts");
    h.noise_sigma_watts = doc.get_real("host.noise_sigma_watts");
    h.meter_step_watts = doc.get_real("host.meter_step_watts");
    h.meter_period_seconds = doc.get_int("host.meter_period_seconds");
    return h;
}

void check_versioned(const KvDoc& doc, std::string_view format)
{
    if (doc.get("format") != format) {
        throw Error(Errc::format, "document is a '" + doc.get("format") + "', expected '" + std::string(format) + "'");
    }
    if (doc.get("version") != "v1") {
        throw Error(Errc::version, "unsupported " + std::string(format) + " version '" + doc.get("version") + "'");
    }
}

// Writes `content` to `path` through a hidden sibling and a rename.
void write_atomic(const fs::path& path, const std::string& content)
{
    auto staged = path.parent_path() / ("." + path.filename().string() + ".tmp");
    write_file(staged, content);
    std::error_code ec;
    fs::rename(staged, path, ec);
    if (ec) {
        fs::remove(staged, ec);
        throw Error(Errc::storage, "cannot commit " + path.string());
    }
}

std::int64_t now_epoch()
{
    using namespace std::chrono;
    return duration_cast<seconds>(system_clock::now().time_since_epoch()).count();
}

void check_name(std::string_view what, const std::string& name)
{
    if (!valid_id(name)) {
        throw Error(Errc::configuration, std::string(what) + " '" + name +
                                             "' must be non-empty, use [A-Za-z0-9._-] and not start with '.'");
    }
}

} // namespace

bool valid_id(std::string_view id)
{
    if (id.empty() || id.front() == '.') {
        return false;
    }
    return std::all_of(id.begin(), id.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' || c == '_' ||
               c == '-';
    });
}

KvDoc to_document(const ExperimentManifest& m)
{
    KvDoc doc;
    doc.set("format", std::string("manifest"));
    doc.set("version", std::string("v1"));
    doc.set("id", m.id);
    doc.set_int("created", m.created_epoch);
    put_flavor(doc, "flavor.", m.flavor);
    put_workload(doc, "workload.", m.workload);
    doc.set_int("marks.start", m.marks.start_epoch);
    doc.set_int("marks.end", m.marks.end_epoch);
    doc.set("files.resources", m.resources_file);
    doc.set("files.power", m.power_file);
    doc.set("files.marks", m.marks_file);
    doc.set_int("mix.count", static_cast<std::int64_t>(m.mix.size()));
    for (std::size_t i = 0; i < m.mix.size(); ++i) {
        const auto prefix = "mix." + std::to_string(i) + ".";
        put_flavor(doc, prefix + "flavor.", m.mix[i].flavor);
        put_workload(doc, prefix + "workload.", m.mix[i].workload);
    }
    if (m.ground_truth) {
        put_host(doc, *m.ground_truth);
    }
    return doc;
}

ExperimentManifest manifest_from_document(const KvDoc& doc)
{
    check_versioned(doc, "manifest");
    ExperimentManifest m;
    m.id = doc.get("id");
    m.created_epoch = doc.get_int("created");
    m.flavor = get_flavor(doc, "flavor.");
    m.workload = get_workload(doc, "workload.");
    m.marks = {doc.get_int("marks.start"), doc.get_int("marks.end")};
    m.resources_file = doc.get("files.resources");
    m.power_file = doc.get("files.power");
    m.marks_file = doc.get("files.marks");
    const auto mixes = doc.get_int("mix.count");
    for (std::int64_t i = 0; i < mixes; ++i) {
        const auto prefix = "mix." + std::to_string(i) + ".";
        m.mix.push_back({get_flavor(doc, prefix + "flavor."), get_workload(doc, prefix + "workload.")});
    }
    if (doc.contains("host.static_watts")) {
        m.ground_truth = get_host(doc);
    }
    return m;
}

ExperimentManifest save_experiment(const fs::path& root, const sim::ExperimentRecord& record,
                                   const SaveOptions& options)
{
    check_name("experiment id", record.id);
    const auto dir = experiments_dir(root);
    ensure_dir(dir);
    const auto target = dir / record.id;
    if (fs::exists(target)) {
        throw Error(Errc::conflict, "experiment '" + record.id + "' already exists");
    }

    ExperimentManifest m;
    m.id = record.id;
    m.flavor = record.flavor;
    m.workload = record.workload;
    m.marks = record.marks;
    m.created_epoch = options.created_epoch.value_or(now_epoch());
    m.mix = record.mix;
    m.ground_truth = record.ground_truth;

    const auto staging = dir / (".staging-" + record.id);
    std::error_code ec;
    fs::remove_all(staging, ec);
    ensure_dir(staging);
    try {
        write_file(staging / m.resources_file, ingest::serialize_resource_csv(record.resources));
        write_file(staging / m.power_file, ingest::serialize_power_log(record.power));
        write_file(staging / m.marks_file, ingest::serialize_marks(record.marks));
        write_file(staging / manifest_name, to_document(m).render());
        if (options.before_commit) {
            options.before_commit(staging);
        }
        fs::rename(staging, target, ec);
        if (ec) {
            if (fs::exists(target)) {
                throw Error(Errc::conflict, "experiment '" + record.id + "' already exists");
            }
            throw Error(Errc::storage, "cannot commit experiment '" + record.id + "': " + ec.message());
        }
    } catch (...) {
        fs::remove_all(staging, ec);
        throw;
    }
    return m;
}

bool has_experiment(const fs::path& root, const std::string& id)
{
    return valid_id(id) && fs::is_regular_file(experiments_dir(root) / id / manifest_name);
}

sim::ExperimentRecord load_experiment(const fs::path& root, const std::string& id)
{
    check_root(root);
    if (!has_experiment(root, id)) {
        throw Error(Errc::storage, "no experiment '" + id + "' in " + root.string());
    }
    const auto dir = experiments_dir(root) / id;
    auto m = manifest_from_document(KvDoc::parse(read_file(dir / manifest_name)));

    sim::ExperimentRecord rec;
    rec.id = m.id;
    rec.flavor = m.flavor;
    rec.workload = m.workload;
    rec.marks = ingest::parse_marks(read_file(dir / m.marks_file));
    if (rec.marks != m.marks) {
        throw Error(Errc::storage, "marks file of '" + id + "' disagrees with its manifest");
    }
    rec.resources = ingest::parse_resource_csv(read_file(dir / m.resources_file));
    rec.power = ingest::parse_power_log(read_file(dir / m.power_file));
    rec.ground_truth = m.ground_truth;
    rec.mix = m.mix;
    return rec;
}

std::vector<ExperimentManifest> query(const fs::path& root, const QueryFilter& filter)
{
    check_root(root);
    std::vector<ExperimentManifest> out;
    const auto dir = experiments_dir(root);
    std::error_code ec;
    if (!fs::exists(dir, ec)) {
        return out;
    }
    fs::directory_iterator it(dir, ec);
    if (ec) {
        throw Error(Errc::storage, "cannot list " + dir.string() + ": " + ec.message());
    }
    for (const auto& entry : it) {
        const auto name = entry.path().filename().string();
        if (!valid_id(name) || !fs::is_regular_file(entry.path() / manifest_name)) {
            continue;
        }
        auto m = manifest_from_document(KvDoc::parse(read_file(entry.path() / manifest_name)));
        if (filter.flavor && m.flavor.name != *filter.flavor) {
            continue;
        }
        if (filter.workload && m.workload.kind != *filter.workload) {
            continue;
        }
        out.push_back(std::move(m));
    }
    std::sort(out.begin(), out.end(), [](const ExperimentManifest& a, const ExperimentManifest& b) {
        return std::tie(a.created_epoch, a.id) < std::tie(b.created_epoch, b.id);
    });
    return out;
}

void save_model(const fs::path& root, const std::string& name, const power::PowerModel& model)
{
    check_name("model name", name);
    ensure_dir(models_dir(root));
    write_atomic(models_dir(root) / name, power::to_document(model).render());
}

void save_model(const fs::path& root, const std::string& name, const power::BayesClassifier& clf)
{
    check_name("model name", name);
    ensure_dir(models_dir(root));
    write_atomic(models_dir(root) / name, power::to_document(clf).render());
}

bool has_model(const fs::path& root, const std::string& name)
{
    return valid_id(name) && fs::is_regular_file(models_dir(root) / name);
}

power::PowerModel load_power_model(const fs::path& root, const std::string& name)
{
    if (!has_model(root, name)) {
        throw Error(Errc::storage, "no model '" + name + "' in " + root.string());
    }
    return power::power_model_from_document(KvDoc::parse(read_file(models_dir(root) / name)));
}

power::BayesClassifier load_bayes_classifier(const fs::path& root, const std::string& name)
{
    if (!has_model(root, name)) {
        throw Error(Errc::storage, "no model '" + name + "' in " + root.string());
    }
    return power::bayes_from_document(KvDoc::parse(read_file(models_dir(root) / name)));
}

} // namespace greenmeter::store
