#include "manifest.hpp"

#include "ptkit/error.hpp"
#include "ptkit/utf8.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <memory>

namespace ptkit::cli {

namespace {

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free)
    {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
            throw RuntimeError("cannot initialise SHA-256");
        }
    }
    void update(const void *data, std::size_t n) { EVP_DigestUpdate(ctx_.get(), data, n); }
    std::string hex()
    {
        unsigned char md[EVP_MAX_MD_SIZE];
        unsigned int len = 0;
        EVP_DigestFinal_ex(ctx_.get(), md, &len);
        std::string out;
        char buf[3];
        for (unsigned int i = 0; i < len; ++i) {
            std::snprintf(buf, sizeof buf, "%02x", md[i]);
            out += buf;
        }
        return out;
    }

private:
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

std::pair<std::string, std::uint64_t> hash_file(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot read input " + path.string());
    }
    Sha256 sha;
    std::uint64_t total = 0;
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        const auto n = static_cast<std::size_t>(in.gcount());
        sha.update(buf.data(), n);
        total += n;
    }
    return {sha.hex(), total};
}

} // namespace

std::string sha256_hex(std::string_view data)
{
    Sha256 sha;
    sha.update(data.data(), data.size());
    return sha.hex();
}

InputDigest digest_input(const std::filesystem::path &path)
{
    InputDigest d;
    d.path = path.string();
    if (std::filesystem::is_directory(path)) {
        std::vector<std::filesystem::path> files;
        for (const auto &e : std::filesystem::recursive_directory_iterator(path)) {
            if (e.is_regular_file()) {
                files.push_back(std::filesystem::relative(e.path(), path));
            }
        }
        std::sort(files.begin(), files.end());
        Sha256 sha;
        for (const auto &rel : files) {
            const auto [hex, bytes] = hash_file(path / rel);
            const auto line = rel.generic_string() + '\0' + hex + '\n';
            sha.update(line.data(), line.size());
            d.bytes += bytes;
        }
        d.sha256 = sha.hex();
    } else {
        std::tie(d.sha256, d.bytes) = hash_file(path);
    }
    return d;
}

std::string utc_timestamp()
{
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string RunManifest::render(bool canonical) const
{
    using nlohmann::json;
    json inputs_j = json::array();
    for (const auto &i : inputs) {
        inputs_j.push_back({{"path", utf8::sanitize(i.path)}, {"sha256", i.sha256}, {"bytes", i.bytes}});
    }
    json argv_j = json::array();
    for (const auto &a : argv) {
        argv_j.push_back(utf8::sanitize(a));
    }
    json outputs_j = json::array();
    for (const auto &o : outputs) {
        outputs_j.push_back(utf8::sanitize(o));
    }
    json j{
        {"tool", "ptkit"},
        {"version", tool_version},
        {"subcommand", subcommand},
        {"argv", std::move(argv_j)},
        {"config", utf8::sanitize(config)},
        {"inputs", std::move(inputs_j)},
        {"seed", seed ? json(*seed) : json(nullptr)},
        {"outcome",
         {{"status", status},
          {"exit_code", exit_code},
          {"message", utf8::sanitize(message)},
          {"partial_outputs", partial_outputs}}},
        {"outputs", std::move(outputs_j)},
    };
    if (!canonical) {
        j["started_at"] = started_at;
        j["finished_at"] = finished_at;
    }
    return j.dump(2) + "\n";
}

void RunManifest::write_atomic(const std::filesystem::path &path, bool canonical) const
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << render(canonical);
        out.flush();
        if (!out) {
            throw RuntimeError("cannot write manifest " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

} // namespace ptkit::cli
