#include "lssm/io.hpp"

#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "lssm/errors.hpp"
#include "lssm/sha256.hpp"

namespace lssm {
namespace {

std::string strip_cr(std::string line) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
        line.pop_back();
    return line;
}

// Parses a full, finite double; rejects trailing garbage and empty fields.
double parse_number(const std::string& field, const std::string& path,
                    std::size_t line_no) {
    const char* begin = field.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    while (end && *end != '\0' && std::isspace(static_cast<unsigned char>(*end)))
        ++end;
    if (field.empty() || end == begin || (end && *end != '\0'))
        throw IoError(path + ":" + std::to_string(line_no) +
                      ": malformed number '" + field + "'");
    return v;
}

bool is_iso_date(const std::string& d) {
    if (d.size() != 10 || d[4] != '-' || d[7] != '-') return false;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (i == 4 || i == 7) continue;
        if (!std::isdigit(static_cast<unsigned char>(d[i]))) return false;
    }
    return true;
}

std::ofstream open_out(const std::string& path, bool binary) {
    std::ofstream f(path, binary ? std::ios::binary | std::ios::trunc
                                 : std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    return f;
}

std::ifstream open_in(const std::string& path, bool binary) {
    std::ifstream f(path, binary ? std::ios::binary : std::ios::in);
    if (!f) throw IoError("cannot open '" + path + "' for reading");
    return f;
}

void check_paths_shape(const SimResult& r) {
    if (r.paths.empty())
        throw ConfigError("paths archive: no paths to write");
    for (const auto& p : r.paths)
        if (p.size() != r.times.size())
            throw ConfigError(
                "paths archive: path length does not match time grid");
}

std::string utc_now_iso() {
    const std::time_t t =
        std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace

void PriceSeries::validate(bool require_positive) const {
    if (dates.size() != prices.size())
        throw ConfigError("price series: dates and prices differ in length");
    if (prices.empty()) throw ConfigError("price series: empty");
    for (std::size_t i = 0; i < dates.size(); ++i) {
        if (!is_iso_date(dates[i]))
            throw ConfigError("price series: date '" + dates[i] +
                              "' is not YYYY-MM-DD");
        if (i > 0 && !(dates[i - 1] < dates[i]))
            throw ConfigError("price series: dates not strictly increasing "
                              "at '" + dates[i] + "'");
        if (!std::isfinite(prices[i]))
            throw ConfigError("price series: non-finite price at '" +
                              dates[i] + "'");
        if (require_positive && prices[i] <= 0.0)
            throw ConfigError("price series: non-positive price at '" +
                              dates[i] + "' (log-scale modelling requires "
                              "positive prices)");
    }
}

PriceSeries read_price_csv(const std::string& path, bool require_positive) {
    std::ifstream f = open_in(path, false);
    std::string line;
    if (!std::getline(f, line))
        throw IoError(path + ": empty file");
    // Tolerate a UTF-8 byte-order mark before the header.
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
        line.erase(0, 3);
    line = strip_cr(line);
    if (line != "date,price")
        throw IoError(path + ": expected header 'date,price', got '" + line +
                      "'");
    PriceSeries s;
    std::size_t line_no = 1;
    while (std::getline(f, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos ||
            line.find(',', comma + 1) != std::string::npos)
            throw IoError(path + ":" + std::to_string(line_no) +
                          ": expected exactly two comma-separated fields");
        s.dates.push_back(line.substr(0, comma));
        s.prices.push_back(
            parse_number(line.substr(comma + 1), path, line_no));
    }
    s.validate(require_positive);
    return s;
}

void write_price_csv(const std::string& path, const PriceSeries& s) {
    s.validate(false);
    std::ofstream f = open_out(path, false);
    f << "date,price\n" << std::setprecision(17);
    for (std::size_t i = 0; i < s.size(); ++i)
        f << s.dates[i] << ',' << s.prices[i] << '\n';
    if (!f) throw IoError("write failed for '" + path + "'");
}

void write_paths_csv(const std::string& path, const SimResult& r) {
    check_paths_shape(r);
    std::ofstream f = open_out(path, false);
    f << "time";
    for (std::size_t p = 0; p < r.paths.size(); ++p) f << ",path" << p;
    f << '\n' << std::setprecision(17);
    for (std::size_t i = 0; i < r.times.size(); ++i) {
        f << r.times[i];
        for (const auto& p : r.paths) f << ',' << p[i];
        f << '\n';
    }
    if (!f) throw IoError("write failed for '" + path + "'");
}

namespace {
constexpr char kPathsMagic[4] = {'L', 'S', 'S', 'P'};
constexpr std::uint32_t kPathsVersion = 1;
} // namespace

void write_paths_binary(const std::string& path, const SimResult& r) {
    check_paths_shape(r);
    std::ofstream f = open_out(path, true);
    const std::uint64_t n_paths = r.paths.size();
    const std::uint64_t n_samples = r.times.size();
    f.write(kPathsMagic, 4);
    f.write(reinterpret_cast<const char*>(&kPathsVersion), 4);
    f.write(reinterpret_cast<const char*>(&n_paths), 8);
    f.write(reinterpret_cast<const char*>(&n_samples), 8);
    f.write(reinterpret_cast<const char*>(&r.dt), 8);
    for (const auto& p : r.paths)
        f.write(reinterpret_cast<const char*>(p.data()),
                static_cast<std::streamsize>(p.size() * sizeof(double)));
    if (!f) throw IoError("write failed for '" + path + "'");
}

SimResult read_paths_binary(const std::string& path) {
    std::ifstream f = open_in(path, true);
    char magic[4];
    std::uint32_t version = 0;
    std::uint64_t n_paths = 0, n_samples = 0;
    SimResult r;
    f.read(magic, 4);
    f.read(reinterpret_cast<char*>(&version), 4);
    f.read(reinterpret_cast<char*>(&n_paths), 8);
    f.read(reinterpret_cast<char*>(&n_samples), 8);
    f.read(reinterpret_cast<char*>(&r.dt), 8);
    if (!f || std::memcmp(magic, kPathsMagic, 4) != 0)
        throw IoError(path + ": not a paths archive (bad magic)");
    if (version != kPathsVersion)
        throw IoError(path + ": unsupported paths archive version " +
                      std::to_string(version));
    if (n_paths == 0 || n_samples == 0 || n_samples > (1ull << 32) ||
        n_paths > (1ull << 32))
        throw IoError(path + ": implausible archive dimensions");
    r.paths.assign(n_paths, std::vector<double>(n_samples));
    for (auto& p : r.paths) {
        f.read(reinterpret_cast<char*>(p.data()),
               static_cast<std::streamsize>(n_samples * sizeof(double)));
        if (!f) throw IoError(path + ": truncated paths archive");
    }
    r.times.resize(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i)
        r.times[i] = static_cast<double>(i) * r.dt;
    return r;
}

std::string sha256_file(const std::string& path) {
    std::ifstream f = open_in(path, true);
    std::ostringstream buf;
    buf << f.rdbuf();
    if (f.bad()) throw IoError("read failed for '" + path + "'");
    return sha256_hex(buf.str());
}

void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream f = open_out(path, false);
    f << j.dump(2) << '\n';
    if (!f) throw IoError("write failed for '" + path + "'");
}

nlohmann::json read_json(const std::string& path) {
    std::ifstream f = open_in(path, false);
    try {
        return nlohmann::json::parse(f);
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError(path + ": invalid JSON: " + e.what());
    }
}

nlohmann::json run_manifest(const std::string& command,
                            const nlohmann::json& config, std::uint64_t seed,
                            const std::vector<std::string>& output_files) {
    nlohmann::json outputs = nlohmann::json::array();
    for (const auto& p : output_files)
        outputs.push_back({{"path", p}, {"sha256", sha256_file(p)}});
    return {{"command", command},
            {"config", config},
            {"config_sha256", sha256_hex(config.dump())},
            {"seed", seed},
            {"library", "lssm"},
            {"version", "0.1.0"},
            {"created_utc", utc_now_iso()},
            {"outputs", outputs}};
}

} // namespace lssm
