#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ptkit::cli {

struct InputDigest {
    std::string path;
    std::string sha256; // of the file, or of "<relpath>\0<file digest>\n" lines for a directory
    std::uint64_t bytes = 0;
};

// Hex SHA-256 of a file or, recursively, a directory.
InputDigest digest_input(const std::filesystem::path &path);
std::string sha256_hex(std::string_view data);

struct RunManifest {
    std::string tool_version;
    std::string subcommand;
    std::vector<std::string> argv;
    std::string config; // rendered RunConfig
    std::vector<InputDigest> inputs;
    std::optional<std::uint64_t> seed;
    std::string started_at;
    std::string finished_at;
    std::string status = "ok"; // ok | validation_error | runtime_error
    int exit_code = 0;
    std::string message;
    std::vector<std::string> outputs;
    bool partial_outputs = false;

    // Canonical mode drops timestamps so reruns are byte-identical.
    std::string render(bool canonical) const;
    // Writes to a sibling temp file and renames it over `path`.
    void write_atomic(const std::filesystem::path &path, bool canonical) const;
};

std::string utc_timestamp();

} // namespace ptkit::cli
