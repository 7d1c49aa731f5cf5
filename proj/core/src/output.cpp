#include "cbdi/output.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include "cbdi/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "binary path frames assume a little-endian host");

namespace cbdi {

std::string Provenance::hash_hex() const {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(config_hash));
    return buf;
}

void provenance_json(JsonWriter& w, const Provenance& prov) {
    w.key("provenance").begin_object();
    w.kv("version", prov.version);
    w.kv("config_hash", prov.hash_hex());
    w.kv("seed", static_cast<unsigned long long>(prov.seed));
    w.kv("config_toml", prov.config_toml);
    w.end_object();
}

void provenance_csv_header(std::ostream& os, const Provenance& prov) {
    os << "# cbdi " << prov.version << "\n";
    os << "# config_hash=" << prov.hash_hex() << " seed=" << prov.seed << "\n";
    os << "# config:\n";
    std::istringstream is(prov.config_toml);
    std::string line;
    while (std::getline(is, line)) os << "# " << line << "\n";
}

std::string csv_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

void write_paths_csv(std::ostream& os, std::span<const PathRecord> paths,
                     const Provenance& prov) {
    provenance_csv_header(os, prov);
    os << "path_id,t,x,status\n";
    for (size_t id = 0; id < paths.size(); ++id) {
        const auto& p = paths[id];
        for (size_t i = 0; i < p.times.size(); ++i) {
            // status at this time, not the terminal one
            const char* st = "alive";
            if (p.status != PathStatus::Alive && p.times[i] >= p.status_time)
                st = p.status == PathStatus::Extinct ? "extinct" : "exploded";
            os << id << ',' << csv_double(p.times[i]) << ',' << csv_double(p.values[i])
               << ',' << st << '\n';
        }
    }
}

namespace {

template <typename T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw config_error("truncated binary path file");
    return v;
}

} // namespace

void write_paths_binary(std::ostream& os, std::span<const PathRecord> paths,
                        const Provenance& prov) {
    os.write("CBDI", 4);
    put<uint16_t>(os, 1);
    put<uint16_t>(os, 0);
    put<uint64_t>(os, prov.config_hash);
    put<uint64_t>(os, prov.seed);
    put<uint32_t>(os, static_cast<uint32_t>(paths.size()));
    for (size_t id = 0; id < paths.size(); ++id) {
        const auto& p = paths[id];
        put<uint32_t>(os, static_cast<uint32_t>(id));
        put<uint8_t>(os, static_cast<uint8_t>(p.status));
        put<double>(os, p.status_time);
        put<uint32_t>(os, static_cast<uint32_t>(p.times.size()));
        os.write(reinterpret_cast<const char*>(p.times.data()),
                 static_cast<std::streamsize>(p.times.size() * sizeof(double)));
        os.write(reinterpret_cast<const char*>(p.values.data()),
                 static_cast<std::streamsize>(p.values.size() * sizeof(double)));
    }
}

BinaryPaths read_paths_binary(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "CBDI", 4) != 0)
        throw config_error("not a binary path file (bad magic)");
    BinaryPaths out;
    out.version = get<uint16_t>(is);
    get<uint16_t>(is); // reserved
    out.config_hash = get<uint64_t>(is);
    out.seed = get<uint64_t>(is);
    const uint32_t n = get<uint32_t>(is);
    out.paths.resize(n);
    for (uint32_t i = 0; i < n; ++i) {
        get<uint32_t>(is); // id == index
        PathRecord& p = out.paths[i];
        p.status = static_cast<PathStatus>(get<uint8_t>(is));
        p.status_time = get<double>(is);
        const uint32_t m = get<uint32_t>(is);
        p.times.resize(m);
        p.values.resize(m);
        is.read(reinterpret_cast<char*>(p.times.data()),
                static_cast<std::streamsize>(m * sizeof(double)));
        is.read(reinterpret_cast<char*>(p.values.data()),
                static_cast<std::streamsize>(m * sizeof(double)));
        if (!is) throw config_error("truncated binary path file");
    }
    return out;
}

} // namespace cbdi
