#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cbdi/json_writer.hpp"
#include "cbdi/path.hpp"

namespace cbdi {

/// Stamped on every output so a run can be reproduced from its artifacts.
struct Provenance {
    std::string version;
    uint64_t config_hash = 0;
    uint64_t seed = 0;
    std::string config_toml;

    std::string hash_hex() const;
};

/// Writes the provenance object under the current JSON context (callers have
/// an open object and want a "provenance" member).
void provenance_json(JsonWriter& w, const Provenance& prov);

/// '#'-prefixed header lines embedding the canonical config; stripping the
/// prefix recovers a loadable config file.
void provenance_csv_header(std::ostream& os, const Provenance& prov);

std::string csv_double(double v); // 9 significant digits

void write_paths_csv(std::ostream& os, std::span<const PathRecord> paths,
                     const Provenance& prov);

/// Compact binary frame: magic "CBDI", u16 version, u16 reserved, u64 config
/// hash, u64 seed, u32 path count; per path u32 id, u8 status, f64 status
/// time, u32 point count, f64 times[], f64 values[]. Little-endian.
void write_paths_binary(std::ostream& os, std::span<const PathRecord> paths,
                        const Provenance& prov);

struct BinaryPaths {
    uint16_t version = 0;
    uint64_t config_hash = 0;
    uint64_t seed = 0;
    std::vector<PathRecord> paths;
};

BinaryPaths read_paths_binary(std::istream& is);

} // namespace cbdi
