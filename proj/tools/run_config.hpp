#pragma once

#include "ptkit/adapter.hpp"
#include "ptkit/corpus.hpp"
#include "ptkit/eval.hpp"
#include "ptkit/train_math.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ptkit::cli {

// Resolved settings for one run, keyed "section.key" ("seed" for top-level
// keys). Precedence: built-in defaults < config file < command-line flags.
//
// File format:
//   # comment
//   seed = 7
//   [corpus]
//   min_words = 50
class RunConfig {
public:
    enum class Type { integer, real, boolean, text, list };

    struct Key {
        std::string name;
        Type type;
        std::string default_value;
        std::string doc;
    };

    static const std::vector<Key> &schema();

    RunConfig();

    static RunConfig parse(std::string_view text, const std::string &origin = "<config>");
    static RunConfig load(const std::filesystem::path &path);
    std::string render() const;

    // Throws ValidationError naming the key when it is unknown or the value
    // does not parse as the key's type.
    void set(const std::string &key, const std::string &value);
    // "section.key=value"
    void set_assignment(const std::string &assignment);

    const std::string &get(const std::string &key) const;
    bool is_set(const std::string &key) const { return !get(key).empty(); }
    long long get_int(const std::string &key) const;
    std::uint64_t get_uint(const std::string &key) const;
    double get_real(const std::string &key) const;
    bool get_bool(const std::string &key) const;
    std::vector<std::string> get_list(const std::string &key) const;

    const std::map<std::string, std::string> &values() const { return values_; }
    bool operator==(const RunConfig &) const = default;

    corpus::PipelineOptions pipeline_options() const;
    eval::EvalConfig eval_config() const;
    adapter::HttpConfig http_config(const std::string &url) const;
    train::ScheduleSpec schedule() const;

private:
    std::map<std::string, std::string> values_;
};

} // namespace ptkit::cli
