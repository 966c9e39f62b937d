#include "ptkit/metrics.hpp"

#include "ptkit/error.hpp"
#include "ptkit/utf8.hpp"

#include <unicode/uchar.h>

#include <algorithm>
#include <cmath>
#include <map>

namespace ptkit::metrics {

namespace {

void check_sizes(std::size_t predictions, std::size_t golds)
{
    if (predictions != golds) {
        throw ValidationError("metric needs as many predictions as golds (" +
                              std::to_string(predictions) + " vs " + std::to_string(golds) + ")");
    }
    if (predictions == 0) {
        throw ValidationError("metric needs at least one example");
    }
}

double f1_from_counts(double tp, double fp, double fn)
{
    const double denom = 2.0 * tp + fp + fn;
    return denom == 0.0 ? 0.0 : 2.0 * tp / denom;
}

std::vector<std::string> tokens_of(std::string_view text)
{
    std::vector<std::string> out;
    std::string current;
    for (char c : normalize_answer(text)) {
        if (c == ' ') {
            out.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    if (!current.empty()) {
        out.push_back(std::move(current));
    }
    return out;
}

} // namespace

std::string_view to_string(MetricKind kind)
{
    switch (kind) {
    case MetricKind::accuracy:
        return "accuracy";
    case MetricKind::f1_binary:
        return "f1_binary";
    case MetricKind::f1_macro:
        return "f1_macro";
    case MetricKind::pearson:
        return "pearson";
    case MetricKind::token_f1:
        return "token_f1";
    }
    return "accuracy";
}

MetricKind metric_from_string(std::string_view name)
{
    for (auto kind : {MetricKind::accuracy, MetricKind::f1_binary, MetricKind::f1_macro,
                      MetricKind::pearson, MetricKind::token_f1}) {
        if (to_string(kind) == name) {
            return kind;
        }
    }
    throw ValidationError("unknown metric '" + std::string(name) + "'");
}

double accuracy(const std::vector<std::string> &predictions, const std::vector<std::string> &golds)
{
    check_sizes(predictions.size(), golds.size());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < golds.size(); ++i) {
        hits += predictions[i] == golds[i] ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(golds.size());
}

double f1_binary(const std::vector<std::string> &predictions, const std::vector<std::string> &golds,
                 const std::string &positive)
{
    check_sizes(predictions.size(), golds.size());
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < golds.size(); ++i) {
        const bool p = predictions[i] == positive;
        const bool g = golds[i] == positive;
        tp += p && g ? 1 : 0;
        fp += p && !g ? 1 : 0;
        fn += !p && g ? 1 : 0;
    }
    return f1_from_counts(tp, fp, fn);
}

double f1_macro(const std::vector<std::string> &predictions, const std::vector<std::string> &golds,
                const std::vector<std::string> &classes)
{
    check_sizes(predictions.size(), golds.size());
    std::vector<std::string> all = classes;
    auto add = [&all](const std::string &label) {
        if (std::find(all.begin(), all.end(), label) == all.end()) {
            all.push_back(label);
        }
    };
    if (all.empty()) {
        for (std::size_t i = 0; i < golds.size(); ++i) {
            add(golds[i]);
            add(predictions[i]);
        }
    }
    double sum = 0.0;
    for (const auto &c : all) {
        double tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < golds.size(); ++i) {
            const bool p = predictions[i] == c;
            const bool g = golds[i] == c;
            tp += p && g ? 1 : 0;
            fp += p && !g ? 1 : 0;
            fn += !p && g ? 1 : 0;
        }
        sum += f1_from_counts(tp, fp, fn);
    }
    return sum / static_cast<double>(all.size());
}

double pearson(const std::vector<double> &x, const std::vector<double> &y)
{
    check_sizes(x.size(), y.size());
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw MetricError("undefined correlation: zero variance in " +
                          std::string(sxx == 0.0 ? "predictions" : "golds"));
    }
    return sxy / std::sqrt(sxx * syy);
}

std::string normalize_answer(std::string_view text)
{
    std::string out;
    bool pending_space = false;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto d = utf8::decode_one(text, pos);
        pos += d.length;
        const auto cp = static_cast<UChar32>(d.cp);
        if (u_isUWhiteSpace(cp)) {
            pending_space = !out.empty();
            continue;
        }
        if (u_ispunct(cp)) {
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        utf8::append(out, static_cast<char32_t>(u_tolower(cp)));
    }
    return out;
}

double token_f1(std::string_view prediction, std::string_view gold)
{
    const auto p = tokens_of(prediction);
    const auto g = tokens_of(gold);
    if (p.empty() || g.empty()) {
        return p.empty() && g.empty() ? 1.0 : 0.0;
    }
    std::map<std::string, long> counts;
    for (const auto &t : g) {
        ++counts[t];
    }
    long common = 0;
    for (const auto &t : p) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++common;
        }
    }
    if (common == 0) {
        return 0.0;
    }
    const double precision = static_cast<double>(common) / static_cast<double>(p.size());
    const double recall = static_cast<double>(common) / static_cast<double>(g.size());
    return 2.0 * precision * recall / (precision + recall);
}

double max_token_f1(std::string_view prediction, const std::vector<std::string> &golds)
{
    if (golds.empty()) {
        throw ValidationError("token_f1 needs a non-empty gold answer set");
    }
    double best = 0.0;
    for (const auto &g : golds) {
        best = std::max(best, token_f1(prediction, g));
    }
    return best;
}

double mean_token_f1(const std::vector<std::string> &predictions,
                     const std::vector<std::vector<std::string>> &golds)
{
    check_sizes(predictions.size(), golds.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < golds.size(); ++i) {
        sum += max_token_f1(predictions[i], golds[i]);
    }
    return sum / static_cast<double>(golds.size());
}

double compute_metric(MetricKind kind, const std::vector<Prediction> &predictions,
                      const std::vector<Gold> &golds, const MetricOptions &options)
{
    check_sizes(predictions.size(), golds.size());
    std::vector<std::string> p, g;
    if (kind != MetricKind::pearson && kind != MetricKind::token_f1) {
        for (std::size_t i = 0; i < golds.size(); ++i) {
            p.push_back(predictions[i].text);
            g.push_back(golds[i].label);
        }
    }
    switch (kind) {
    case MetricKind::accuracy:
        return accuracy(p, g);
    case MetricKind::f1_binary: {
        std::string positive;
        if (options.positive_label) {
            positive = *options.positive_label;
        } else if (!options.classes.empty()) {
            positive = options.classes.front();
        } else {
            throw ValidationError("f1_binary needs a positive label");
        }
        return f1_binary(p, g, positive);
    }
    case MetricKind::f1_macro:
        return f1_macro(p, g, options.classes);
    case MetricKind::pearson: {
        std::vector<double> x, y;
        for (std::size_t i = 0; i < golds.size(); ++i) {
            x.push_back(predictions[i].value);
            y.push_back(golds[i].value);
        }
        return pearson(x, y);
    }
    case MetricKind::token_f1: {
        std::vector<std::vector<std::string>> answers;
        for (std::size_t i = 0; i < golds.size(); ++i) {
            p.push_back(predictions[i].text);
            answers.push_back(golds[i].answers);
        }
        return mean_token_f1(p, answers);
    }
    }
    throw ValidationError("unknown metric");
}

} // namespace ptkit::metrics
