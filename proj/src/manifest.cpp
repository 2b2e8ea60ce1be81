#include "handjog/manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <json.hpp>

#include "handjog/bytes.hpp"
#include "handjog/error.hpp"

namespace handjog {

std::string git_blob_sha1(std::span<const std::uint8_t> bytes) {
    const std::string header = "blob " + std::to_string(bytes.size()) + '\0';
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx) throw RuntimeFailure("sha1: out of memory");
    const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                    EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                    EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) == 1 &&
                    EVP_DigestFinal_ex(ctx, md.data(), &len) == 1;
    EVP_MD_CTX_free(ctx);
    if (!ok) throw RuntimeFailure("sha1 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xf];
    }
    return out;
}

std::string git_blob_sha1_file(const std::filesystem::path& path) { return git_blob_sha1(read_file_bytes(path)); }

FileRecord record_file(std::string role, const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return {std::move(role), path, git_blob_sha1(bytes), bytes.size()};
}

namespace {

nlohmann::json files_json(const std::vector<FileRecord>& files) {
    auto arr = nlohmann::json::array();
    for (const auto& f : files) {
        arr.push_back({{"role", f.role}, {"path", f.path.string()}, {"sha1", f.sha1}, {"bytes", f.bytes}});
    }
    return arr;
}

std::vector<FileRecord> files_from(const nlohmann::json& arr) {
    std::vector<FileRecord> out;
    for (const auto& f : arr) {
        out.push_back({f.at("role").get<std::string>(), f.at("path").get<std::string>(), f.at("sha1").get<std::string>(),
                       f.at("bytes").get<std::uintmax_t>()});
    }
    return out;
}

}  // namespace

std::string RunManifest::to_json() const {
    nlohmann::json j;
    j["command"] = command;
    j["argv"] = argv;
    j["config"] = config;
    j["seeds"] = seeds;
    j["inputs"] = files_json(inputs);
    j["outputs"] = files_json(outputs);
    j["seconds"] = seconds;
    j["exit_code"] = exit_code;
    return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        RunManifest m;
        m.command = j.at("command").get<std::string>();
        m.argv = j.at("argv").get<std::vector<std::string>>();
        m.config = j.at("config").get<std::map<std::string, std::string>>();
        m.seeds = j.at("seeds").get<std::map<std::string, std::uint64_t>>();
        m.inputs = files_from(j.at("inputs"));
        m.outputs = files_from(j.at("outputs"));
        m.seconds = j.at("seconds").get<double>();
        m.exit_code = j.at("exit_code").get<int>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad manifest: ") + e.what());
    }
}

void RunManifest::write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw RuntimeFailure("cannot write manifest " + path.string());
    out << to_json();
    if (!out) throw RuntimeFailure("failed writing manifest " + path.string());
}

std::vector<std::filesystem::path> stale_files(const RunManifest& manifest) {
    std::vector<std::filesystem::path> out;
    for (const auto* group : {&manifest.inputs, &manifest.outputs}) {
        for (const auto& f : *group) {
            std::error_code ec;
            if (!std::filesystem::exists(f.path, ec) || git_blob_sha1_file(f.path) != f.sha1) out.push_back(f.path);
        }
    }
    return out;
}

}  // namespace handjog
