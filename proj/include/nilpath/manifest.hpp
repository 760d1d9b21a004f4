#pragma once

// Canonical JSON, SHA-256 digests and the run manifest written next to
// experiment outputs.

#include "nilpath/error.hpp"

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iterator>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace nilpath {

/// Sorted keys, no whitespace, floats as %.17g. Equal documents produce
/// equal text regardless of key order in the source.
inline void canonical_dump(const nlohmann::json& j, std::string& out) {
    switch (j.type()) {
    case nlohmann::json::value_t::object: {
        out += '{';
        bool first = true;
        for (const auto& [key, value] : j.items()) { // std::map iteration is sorted
            if (!first) out += ',';
            first = false;
            out += nlohmann::json(key).dump();
            out += ':';
            canonical_dump(value, out);
        }
        out += '}';
        break;
    }
    case nlohmann::json::value_t::array: {
        out += '[';
        bool first = true;
        for (const auto& value : j) {
            if (!first) out += ',';
            first = false;
            canonical_dump(value, out);
        }
        out += ']';
        break;
    }
    case nlohmann::json::value_t::number_float: {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", j.get<double>());
        out += buf;
        break;
    }
    default: out += j.dump();
    }
}

inline std::string canonical_dump(const nlohmann::json& j) {
    std::string out;
    canonical_dump(j, out);
    return out;
}

inline std::string sha256_hex(std::string_view data) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
        throw Error("SHA-256 computation failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

inline std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path);
    const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return sha256_hex(data);
}

inline std::string utc_timestamp(std::chrono::system_clock::time_point tp = std::chrono::system_clock::now()) {
    const std::time_t t = std::chrono::system_clock::to_time_t(tp);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct ManifestOutput {
    std::string path;
    std::string sha256;
};

/// Everything needed to regenerate a run: the full config (and its hash),
/// the seed and the tool version.
struct RunManifest {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string tool_version;
    std::string started;
    std::string finished;
    std::vector<ManifestOutput> outputs;
    nlohmann::json config;
    nlohmann::json summary;
};

inline void to_json(nlohmann::json& j, const RunManifest& m) {
    nlohmann::json outputs = nlohmann::json::array();
    for (const auto& o : m.outputs) outputs.push_back({{"path", o.path}, {"sha256", o.sha256}});
    j = nlohmann::json{{"config_hash", m.config_hash}, {"seed", m.seed},         {"tool_version", m.tool_version},
                       {"started", m.started},         {"finished", m.finished}, {"outputs", std::move(outputs)},
                       {"config", m.config},           {"summary", m.summary}};
}

inline std::string config_hash(const nlohmann::json& config) { return sha256_hex(canonical_dump(config)); }

} // namespace nilpath
