#ifndef ROTIGCV_HARNESS_RESULTS_HPP
#define ROTIGCV_HARNESS_RESULTS_HPP

#include <cstdio>
#include <fstream>
#include <iostream>
#include <ostream>
#include <span>
#include <string>

#include "json.hpp"

#include "rotigcv/errors.hpp"
#include "rotigcv/harness/experiment.hpp"

namespace rotigcv::harness {

enum class OutputFormat { csv, jsonl };

inline OutputFormat parse_format(const std::string& s) {
    if (s == "csv") return OutputFormat::csv;
    if (s == "jsonl" || s == "json-lines") return OutputFormat::jsonl;
    throw ConfigError("unknown output format '" + s + "' (expected csv or jsonl)");
}

inline constexpr const char* kCsvHeader =
    "method,lambda,metric_value,exact_risk,seed,resample,r2_hat,sigma2_hat,tuned";

/// 17 significant digits: enough to round-trip any double.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_results(std::span<const ResultRow> rows, OutputFormat format, std::ostream& out) {
    if (format == OutputFormat::csv) {
        out << kCsvHeader << '\n';
        for (const auto& r : rows) {
            out << r.method << ',' << format_double(r.lambda) << ',' << format_double(r.metric_value)
                << ',' << format_double(r.exact_risk) << ',' << r.seed << ',' << r.resample << ','
                << format_double(r.r2_hat) << ',' << format_double(r.sigma2_hat) << ','
                << (r.tuned ? 1 : 0) << '\n';
        }
        return;
    }
    for (const auto& r : rows) {
        out << "{\"method\":" << nlohmann::json(r.method).dump()
            << ",\"lambda\":" << format_double(r.lambda)
            << ",\"metric_value\":" << format_double(r.metric_value)
            << ",\"exact_risk\":" << format_double(r.exact_risk) << ",\"seed\":" << r.seed
            << ",\"resample\":" << r.resample << ",\"r2_hat\":" << format_double(r.r2_hat)
            << ",\"sigma2_hat\":" << format_double(r.sigma2_hat)
            << ",\"tuned\":" << (r.tuned ? "true" : "false") << "}\n";
    }
}

/// Writes rows to `path` ("-" is stdout).
inline void emit_results(std::span<const ResultRow> rows, OutputFormat format, const std::string& path) {
    if (rows.empty()) throw ArgumentError("emit_results: no rows to write");
    if (path == "-") {
        write_results(rows, format, std::cout);
        std::cout.flush();
        return;
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("emit_results: cannot open '" + path + "' for writing");
    write_results(rows, format, f);
    f.flush();
    if (!f) throw IoError("emit_results: write to '" + path + "' failed");
}

/// Machine-readable error record, one JSON object per line.
inline std::string error_record(const std::string& kind, const std::string& message,
                                std::optional<std::uint64_t> seed = std::nullopt,
                                std::optional<std::size_t> resample = std::nullopt) {
    nlohmann::json j;
    j["error"] = kind;
    j["message"] = message;
    if (seed) j["seed"] = *seed;
    if (resample) j["resample"] = *resample;
    return j.dump();
}

}  // namespace rotigcv::harness

#endif  // ROTIGCV_HARNESS_RESULTS_HPP
