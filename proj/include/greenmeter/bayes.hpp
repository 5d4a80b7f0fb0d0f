#pragma once

#include "greenmeter/kvdoc.hpp"
#include "greenmeter/powermodel.hpp"

#include <array>
#include <span>
#include <string>
#include <vector>

namespace greenmeter::power {

inline constexpr std::size_t min_samples_per_class = 10;
inline constexpr double variance_floor = 1e-6;

struct LabeledWindow {
    FeatureVector features;
    std::string label;
    double dynamic_watts = 0.0;
};

struct ClassModel {
    std::string label;
    double prior = 0.0;
    std::array<double, 4> mean{};
    std::array<double, 4> variance{};
    double mean_dynamic_watts = 0.0;
    std::int64_t count = 0;

    bool operator==(const ClassModel&) const = default;
};

// Gaussian naive Bayes over the four utilization features. Classes keep the
// order in which their labels first appear in the training data.
struct BayesClassifier {
    std::vector<ClassModel> classes;

    bool fitted() const noexcept { return classes.size() >= 2; }
    bool operator==(const BayesClassifier&) const = default;
};

struct Classification {
    std::string label;
    double posterior = 0.0;
    double expected_dynamic_watts = 0.0;
};

BayesClassifier bayes_fit(std::span<const LabeledWindow> labeled);

// Unnormalized log posterior of each class, in class order.
std::vector<double> bayes_log_scores(const BayesClassifier& clf, const FeatureVector& fv);

// Argmax over log scores; ties keep the earlier class.
Classification classify_scores(const BayesClassifier& clf, std::span<const double> log_scores);

Classification bayes_classify(const BayesClassifier& clf, const FeatureVector& fv);

KvDoc to_document(const BayesClassifier& clf);
BayesClassifier bayes_from_document(const KvDoc& doc);

} // namespace greenmeter::power
