#include "greenmeter/bayes.hpp"

#include "greenmeter/error.hpp"

#include <cmath>
#include <map>
#include <numbers>

namespace greenmeter::power {

BayesClassifier bayes_fit(std::span<const LabeledWindow> labeled)
{
    std::vector<std::string> order;
    std::map<std::string, std::vector<const LabeledWindow*>> by_label;
    for (const auto& w : labeled) {
        for (double v : w.features.as_array()) {
            if (!std::isfinite(v)) {
                throw Error(Errc::data, "non-finite feature in class '" + w.label + "'");
            }
        }
        auto& members = by_label[w.label];
        if (members.empty()) {
            order.push_back(w.label);
        }
        members.push_back(&w);
    }
    if (order.size() < 2) {
        throw Error(Errc::fit, "need at least two classes, got " + std::to_string(order.size()));
    }

    BayesClassifier clf;
    const double total = static_cast<double>(labeled.size());
    for (const auto& label : order) {
        const auto& members = by_label[label];
        if (members.size() < min_samples_per_class) {
            throw Error(Errc::fit, "class '" + label + "' has " + std::to_string(members.size()) +
                                       " samples (need " + std::to_string(min_samples_per_class) + ")");
        }
        ClassModel c;
        c.label = label;
        c.count = static_cast<std::int64_t>(members.size());
        const double n = static_cast<double>(members.size());
        c.prior = n / total;
        for (const auto* w : members) {
            const auto f = w->features.as_array();
            for (std::size_t r = 0; r < 4; ++r) {
                c.mean[r] += f[r];
            }
            c.mean_dynamic_watts += w->dynamic_watts;
        }
        for (auto& m : c.mean) {
            m /= n;
        }
        c.mean_dynamic_watts /= n;
        for (const auto* w : members) {
            const auto f = w->features.as_array();
            for (std::size_t r = 0; r < 4; ++r) {
                c.variance[r] += (f[r] - c.mean[r]) * (f[r] - c.mean[r]);
            }
        }
        for (auto& v : c.variance) {
            v = std::max(v / n, variance_floor);
        }
        clf.classes.push_back(std::move(c));
    }
    return clf;
}

std::vector<double> bayes_log_scores(const BayesClassifier& clf, const FeatureVector& fv)
{
    const auto f = fv.as_array();
    std::vector<double> scores;
    scores.reserve(clf.classes.size());
    for (const auto& c : clf.classes) {
        double s = std::log(c.prior);
        for (std::size_t r = 0; r < 4; ++r) {
            const double d = f[r] - c.mean[r];
            s -= 0.5 * (std::log(2.0 * std::numbers::pi * c.variance[r]) + d * d / c.variance[r]);
        }
        scores.push_back(s);
    }
    return scores;
}

Classification classify_scores(const BayesClassifier& clf, std::span<const double> log_scores)
{
    if (!clf.fitted() || log_scores.size() != clf.classes.size()) {
        throw Error(Errc::usage, "classifier is not fitted");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < log_scores.size(); ++i) {
        if (log_scores[i] > log_scores[best]) {
            best = i;
        }
    }
    double denom = 0.0;
    for (double s : log_scores) {
        denom += std::exp(s - log_scores[best]);
    }
    const auto& c = clf.classes[best];
    return {c.label, 1.0 / denom, c.mean_dynamic_watts};
}

Classification bayes_classify(const BayesClassifier& clf, const FeatureVector& fv)
{
    if (!clf.fitted()) {
        throw Error(Errc::usage, "classifier is not fitted");
    }
    auto scores = bayes_log_scores(clf, fv);
    return classify_scores(clf, scores);
}

KvDoc to_document(const BayesClassifier& clf)
{
    static constexpr const char* feature_names[] = {"cpu", "mem", "disk", "net"};
    KvDoc doc;
    doc.set("format", std::string("bayes"));
    doc.set("version", std::string("v1"));
    doc.set_int("classes", static_cast<std::int64_t>(clf.classes.size()));
    for (std::size_t i = 0; i < clf.classes.size(); ++i) {
        const auto& c = clf.classes[i];
        const auto prefix = "class." + std::to_string(i) + ".";
        doc.set(prefix + "label", c.label);
        doc.set(prefix + "prior", c.prior);
        doc.set_int(prefix + "count", c.count);
        doc.set(prefix + "mean_dynamic_watts", c.mean_dynamic_watts);
        for (std::size_t r = 0; r < 4; ++r) {
            doc.set(prefix + "mean_" + feature_names[r], c.mean[r]);
            doc.set(prefix + "var_" + feature_names[r], c.variance[r]);
        }
    }
    return doc;
}

BayesClassifier bayes_from_document(const KvDoc& doc)
{
    static constexpr const char* feature_names[] = {"cpu", "mem", "disk", "net"};
    if (doc.get("format") != "bayes") {
        throw Error(Errc::format, "document is a '" + doc.get("format") + "', not a bayes classifier");
    }
    if (doc.get("version") != "v1") {
        throw Error(Errc::version, "unsupported bayes version '" + doc.get("version") + "'");
    }
    BayesClassifier clf;
    const auto n = doc.get_int("classes");
    if (n < 0) {
        throw Error(Errc::format, "negative class count");
    }
    for (std::int64_t i = 0; i < n; ++i) {
        const auto prefix = "class." + std::to_string(i) + ".";
        ClassModel c;
        c.label = doc.get(prefix + "label");
        c.prior = doc.get_real(prefix + "prior");
        c.count = doc.get_int(prefix + "count");
        c.mean_dynamic_watts = doc.get_real(prefix + "mean_dynamic_watts");
        for (std::size_t r = 0; r < 4; ++r) {
            c.mean[r] = doc.get_real(prefix + "mean_" + feature_names[r]);
            c.variance[r] = doc.get_real(prefix + "var_" + feature_names[r]);
        }
        clf.classes.push_back(std::move(c));
    }
    return clf;
}

} // namespace greenmeter::power
