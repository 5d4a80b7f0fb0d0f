#pragma once

#include "greenmeter/bayes.hpp"
#include "greenmeter/powermodel.hpp"
#include "greenmeter/simcloud.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

// File-backed experiment store:
//
//   <root>/experiments/<id>/{manifest, resources.csv, power.log, marks.txt}
//   <root>/models/<name>
//
// Documents are written to a hidden staging name and renamed into place, so
// readers only ever see complete entries. One writer per root.
namespace greenmeter::store {

namespace fs = std::filesystem;

struct ExperimentManifest {
    std::string id;
    sim::Flavor flavor;
    sim::WorkloadSpec workload;
    ingest::ExperimentMarks marks;
    std::string resources_file = "resources.csv";
    std::string power_file = "power.log";
    std::string marks_file = "marks.txt";
    std::int64_t created_epoch = 0;
    std::vector<sim::MixEntry> mix;
    std::optional<sim::HostModel> ground_truth;

    bool operator==(const ExperimentManifest&) const = default;
};

struct QueryFilter {
    std::optional<std::string> flavor;
    std::optional<sim::WorkloadKind> workload;
};

struct SaveOptions {
    // Defaults to the current wall-clock second.
    std::optional<std::int64_t> created_epoch;
    // Runs after every file is staged and before the entry becomes visible.
    std::function<void(const fs::path& staging_dir)> before_commit;
};

bool valid_id(std::string_view id);

KvDoc to_document(const ExperimentManifest& manifest);
ExperimentManifest manifest_from_document(const KvDoc& doc);

ExperimentManifest save_experiment(const fs::path& root, const sim::ExperimentRecord& record,
                                   const SaveOptions& options = {});
sim::ExperimentRecord load_experiment(const fs::path& root, const std::string& id);
bool has_experiment(const fs::path& root, const std::string& id);

// Manifests matching every provided filter field, by creation epoch then id.
std::vector<ExperimentManifest> query(const fs::path& root, const QueryFilter& filter = {});

void save_model(const fs::path& root, const std::string& name, const power::PowerModel& model);
void save_model(const fs::path& root, const std::string& name, const power::BayesClassifier& clf);
power::PowerModel load_power_model(const fs::path& root, const std::string& name);
power::BayesClassifier load_bayes_classifier(const fs::path& root, const std::string& name);
bool has_model(const fs::path& root, const std::string& name);

} // namespace greenmeter::store
