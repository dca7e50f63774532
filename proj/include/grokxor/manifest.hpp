#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "grokxor/config.hpp"

namespace grokxor {

// FNV-1a 64-bit content hash, printed as 16 hex digits.
std::uint64_t fnv1a64(const void* data, std::size_t size);
std::string hash_file(const std::string& path);

struct ManifestEntry {
    std::string name;  // path relative to the output directory
    std::string hash;
};

// Inventory of one command invocation. Timestamps are filled only when
// requested (GROKXOR_TIMESTAMPS=1 or --timestamps); the default keeps every
// emitted byte a pure function of (config, seed).
struct RunManifest {
    std::string command;
    std::string config_text;  // dump_config snapshot
    std::int64_t master_seed = 0;
    std::string build_id;
    std::string start_time;
    std::string end_time;
    std::vector<ManifestEntry> files;

    void add_file(const std::string& out_dir, const std::string& name);
    std::string to_json() const;
};

std::string build_identifier();
std::string timestamp_now();  // ISO-8601 UTC

}  // namespace grokxor
