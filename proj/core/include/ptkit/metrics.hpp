#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ptkit::metrics {

enum class MetricKind { accuracy, f1_binary, f1_macro, pearson, token_f1 };

std::string_view to_string(MetricKind kind);
MetricKind metric_from_string(std::string_view name);

class MetricError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// All functions return unit-scale values (accuracy 0.75, not 75).
double accuracy(const std::vector<std::string> &predictions, const std::vector<std::string> &golds);
double f1_binary(const std::vector<std::string> &predictions, const std::vector<std::string> &golds,
                 const std::string &positive);
// `classes` lists every class that counts toward the mean; labels seen in
// predictions or golds but missing from it are appended in first-seen order.
double f1_macro(const std::vector<std::string> &predictions, const std::vector<std::string> &golds,
                const std::vector<std::string> &classes = {});
double pearson(const std::vector<double> &x, const std::vector<double> &y);

// Lowercase, drop punctuation, collapse whitespace.
std::string normalize_answer(std::string_view text);
double token_f1(std::string_view prediction, std::string_view gold);
double max_token_f1(std::string_view prediction, const std::vector<std::string> &golds);
double mean_token_f1(const std::vector<std::string> &predictions,
                     const std::vector<std::vector<std::string>> &golds);

struct Prediction {
    std::string text;
    double value = 0.0;
};

struct Gold {
    std::string label;
    double value = 0.0;
    std::vector<std::string> answers;
};

struct MetricOptions {
    std::optional<std::string> positive_label;
    std::vector<std::string> classes;
};

double compute_metric(MetricKind kind, const std::vector<Prediction> &predictions,
                      const std::vector<Gold> &golds, const MetricOptions &options = {});

} // namespace ptkit::metrics
