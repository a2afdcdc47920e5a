#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace risce {

/// Self-describing file container: a text metadata header followed by a
/// little-endian 64-bit float payload. Shared by dataset and checkpoint files.
struct Container {
    std::string kind;
    std::map<std::string, std::string> meta;
    std::vector<double> payload;
};

inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    return fnv1a(s.data(), s.size(), h);
}

namespace detail {

inline std::uint64_t container_hash(const std::string& kind,
                                    const std::map<std::string, std::string>& meta,
                                    const std::vector<double>& payload) {
    std::uint64_t h = fnv1a(kind);
    for (const auto& [k, v] : meta) {
        h = fnv1a(k, h);
        h = fnv1a(v, h);
    }
    h = fnv1a(payload.data(), payload.size() * sizeof(double), h);
    return h;
}

} // namespace detail

inline void save_container(const std::string& path, const Container& c) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_container: cannot open " + path);
    out << "RISCE-CONTAINER v1\n";
    out << "kind=" << c.kind << "\n";
    for (const auto& [k, v] : c.meta)
        out << k << "=" << v << "\n";
    out << "payload_doubles=" << c.payload.size() << "\n";
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(detail::container_hash(c.kind, c.meta, c.payload)));
    out << "payload_hash=" << hex << "\n";
    out << "---\n";
    out.write(reinterpret_cast<const char*>(c.payload.data()),
              static_cast<std::streamsize>(c.payload.size() * sizeof(double)));
    if (!out) throw std::runtime_error("save_container: write failed for " + path);
}

inline Container load_container(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_container: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "RISCE-CONTAINER v1")
        throw std::runtime_error("load_container: bad magic / format version in " + path);
    Container c;
    std::size_t count = 0;
    std::string stored_hash;
    bool have_count = false;
    while (std::getline(in, line)) {
        if (line == "---") break;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("load_container: malformed header line: " + line);
        std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        if (key == "kind") c.kind = val;
        else if (key == "payload_doubles") { count = std::stoull(val); have_count = true; }
        else if (key == "payload_hash") stored_hash = val;
        else c.meta[key] = val;
    }
    if (!have_count || stored_hash.empty())
        throw std::runtime_error("load_container: truncated header in " + path);
    c.payload.resize(count);
    in.read(reinterpret_cast<char*>(c.payload.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (static_cast<std::size_t>(in.gcount()) != count * sizeof(double))
        throw std::runtime_error("load_container: truncated payload in " + path);
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(detail::container_hash(c.kind, c.meta, c.payload)));
    if (stored_hash != hex)
        throw std::runtime_error("load_container: integrity hash mismatch in " + path);
    return c;
}

} // namespace risce
