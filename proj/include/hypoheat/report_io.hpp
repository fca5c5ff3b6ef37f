#pragma once

// CSV and manifest output of sweeps and trajectories, and reading report
// columns back for standalone fits.

#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hypoheat/config.hpp"
#include "hypoheat/error.hpp"
#include "hypoheat/harness.hpp"
#include "hypoheat/solve.hpp"

namespace hypoheat {

inline constexpr const char* kVersion = "0.1.0";

inline std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw IoError("SHA-256 digest failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

inline std::string report_csv(const SweepReport& report) {
    if (report.records.empty()) {
        throw ArgumentError("report has an empty epsilon net");
    }
    std::string out = "epsilon,omega,norm_sup_t,fitted_flag\n";
    for (const auto& r : report.records) {
        out += detail::fmt(r.epsilon) + "," + detail::fmt(r.omega) + "," + detail::fmt(r.norm_sup_t) + "," +
               (r.fitted ? "1" : "0") + "\n";
    }
    return out;
}

inline std::string manifest_text(const SweepReport& report) {
    static const char* experiments[] = {"existence", "uniqueness", "consistency"};
    std::ostringstream m;
    m << "tool: hypoheat " << kVersion << "\n";
    m << "experiment: " << experiments[static_cast<int>(report.experiment)] << "\n";
    m << "config_sha256: " << sha256_hex(report.canonical_config) << "\n";
    m << "started_utc: " << report.started_utc << "\n";
    m << "wall_clock_seconds: " << detail::fmt(report.wall_seconds) << "\n";
    for (const auto& n : report.notes) {
        m << n << "\n";
    }
    for (const auto& r : report.records) {
        if (r.error) {
            m << "error at eps=" << detail::fmt(r.epsilon) << ": " << *r.error << "\n";
        }
    }
    m << "config:\n";
    std::istringstream cfg(report.canonical_config);
    std::string line;
    while (std::getline(cfg, line)) {
        m << "  " << line << "\n";
    }
    m << "VERDICT: " << report.verdict.to_string() << "\n";
    return m.str();
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    out << text;
    out.flush();
    if (!out) {
        throw IoError("write to '" + path.string() + "' failed");
    }
}

inline void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) {
        throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
    }
}

} // namespace detail

/// Writes report.csv and manifest.txt into `out_dir`. The CSV body depends
/// only on the records, so identical configs give identical files.
inline void persist_report(const SweepReport& report, const std::filesystem::path& out_dir) {
    const std::string csv = report_csv(report);
    const std::string manifest = manifest_text(report);
    detail::ensure_dir(out_dir);
    detail::write_file(out_dir / "report.csv", csv);
    detail::write_file(out_dir / "manifest.txt", manifest);
}

/// Columns t, l2, sobolev_nu2, h_nu2, energy; energy is blank when V has
/// negative values.
inline std::string trajectory_csv(const Trajectory& traj) {
    std::string out = "t,l2,sobolev_nu2,h_nu2,energy\n";
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const NormRecord& n = traj.norms[i];
        out += detail::fmt(traj.times[i]) + "," + detail::fmt(n.l2) + "," + detail::fmt(n.sobolev_nu2) + "," +
               detail::fmt(n.h_nu2) + "," + (n.energy ? detail::fmt(*n.energy) : "") + "\n";
    }
    return out;
}

inline void write_trajectory(const Trajectory& traj, const std::filesystem::path& out_dir) {
    const std::string csv = trajectory_csv(traj);
    detail::ensure_dir(out_dir);
    detail::write_file(out_dir / "trajectory.csv", csv);
}

/// (omega, column) pairs from a report CSV.
inline std::vector<std::pair<double, double>> read_report_pairs(const std::filesystem::path& path,
                                                                const std::string& column) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot read '" + path.string() + "'");
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw ArgumentError("'" + path.string() + "' is empty");
    }
    const auto header = detail::split(line, ',');
    auto find = [&](const std::string& name) -> std::size_t {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) {
                return i;
            }
        }
        throw ArgumentError("'" + path.string() + "' has no column '" + name + "'");
    };
    const std::size_t wcol = find("omega");
    const std::size_t vcol = find(column);
    std::vector<std::pair<double, double>> out;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) {
            continue;
        }
        const auto cells = detail::split(line, ',');
        if (cells.size() != header.size()) {
            throw ArgumentError("'" + path.string() + "': row has " + std::to_string(cells.size()) + " cells");
        }
        out.emplace_back(detail::parse_double("omega", cells[wcol]), detail::parse_double(column, cells[vcol]));
    }
    return out;
}

} // namespace hypoheat
