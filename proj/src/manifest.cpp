#include "grokxor/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace grokxor {

std::uint64_t fnv1a64(const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot hash missing file '" + path + "'");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    char out[32];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
    return out;
}

void RunManifest::add_file(const std::string& out_dir, const std::string& name) {
    files.push_back({name, hash_file(out_dir + "/" + name)});
}

std::string RunManifest::to_json() const {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["build"] = build_id;
    j["master_seed"] = master_seed;
    j["start_time"] = start_time;
    j["end_time"] = end_time;
    j["config"] = config_text;
    auto files_json = nlohmann::ordered_json::array();
    for (const auto& f : files) files_json.push_back({{"name", f.name}, {"hash", f.hash}});
    j["files"] = files_json;
    return j.dump(2) + "\n";
}

std::string build_identifier() {
#ifdef GROKXOR_BUILD_ID
    return GROKXOR_BUILD_ID;
#else
    return "grokxor-dev";
#endif
}

std::string timestamp_now() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

}  // namespace grokxor
