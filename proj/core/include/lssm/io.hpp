#pragma once

// File exchange for the library and CLI: daily price series as CSV,
// simulated path archives (CSV and a compact binary format), JSON read/write
// helpers, and run manifests carrying content hashes so that every artifact
// of a run can be reproduced and verified.

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lssm/lss.hpp"

namespace lssm {

// Daily price observations.  Dates are ISO-8601 strings (YYYY-MM-DD) so that
// lexicographic order coincides with chronological order; non-trading days
// are simply absent and time is measured by row index (business days).
struct PriceSeries {
    std::vector<std::string> dates;
    std::vector<double> prices;

    std::size_t size() const { return prices.size(); }

    // ConfigError unless the two arrays have equal, nonzero length, every
    // date is a well-formed YYYY-MM-DD string, dates strictly increase, and
    // all prices are finite (strictly positive when require_positive is set,
    // as required for modelling on the log scale).
    void validate(bool require_positive = true) const;
};

// CSV with header "date,price", one observation per row.  Unreadable files
// and malformed rows raise IoError; inconsistent content raises ConfigError
// through PriceSeries::validate.
PriceSeries read_price_csv(const std::string& path,
                           bool require_positive = true);
void write_price_csv(const std::string& path, const PriceSeries& s);

// Simulated paths as CSV: header "time,path0,path1,...", one row per step.
void write_paths_csv(const std::string& path, const SimResult& r);

// Compact binary path archive (bytes written in host order; the format is
// specified for little-endian hosts, which is all this project targets):
//   magic "LSSP" | u32 version = 1 | u64 n_paths | u64 n_samples | f64 dt |
//   n_paths * n_samples f64 values, row-major, one path per row.
void write_paths_binary(const std::string& path, const SimResult& r);
SimResult read_paths_binary(const std::string& path);

// Hex SHA-256 of the file's raw bytes.  IoError when unreadable.
std::string sha256_file(const std::string& path);

// Pretty-printed JSON write / parse with IoError on failure.
void write_json(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json(const std::string& path);

// Reproducibility manifest for one CLI run: the command, the full inline
// configuration plus its content hash, the seed, the library version, and
// the SHA-256 of every output artifact (files must already exist).
nlohmann::json run_manifest(const std::string& command,
                            const nlohmann::json& config, std::uint64_t seed,
                            const std::vector<std::string>& output_files);

} // namespace lssm
