#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace handjog {

/// Hash git would give the file as a blob: sha1("blob <n>\0" + bytes), hex.
std::string git_blob_sha1(std::span<const std::uint8_t> bytes);
std::string git_blob_sha1_file(const std::filesystem::path& path);

struct FileRecord {
    std::string role;
    std::filesystem::path path;
    std::string sha1;
    std::uintmax_t bytes = 0;
};

FileRecord record_file(std::string role, const std::filesystem::path& path);

/// One per command run, written next to its outputs.
struct RunManifest {
    std::string command;
    std::vector<std::string> argv;
    std::map<std::string, std::string> config;
    std::map<std::string, std::uint64_t> seeds;
    std::vector<FileRecord> inputs;
    std::vector<FileRecord> outputs;
    double seconds = 0.0;
    int exit_code = 0;

    std::string to_json() const;
    static RunManifest from_json(const std::string& text);
    void write(const std::filesystem::path& path) const;
};

/// Paths whose current hash differs from the recorded one (missing files
/// included).
std::vector<std::filesystem::path> stale_files(const RunManifest& manifest);

}  // namespace handjog
