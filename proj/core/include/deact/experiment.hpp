#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "deact/config.hpp"
#include "deact/stats.hpp"
#include "deact/workload.hpp"

namespace deact {

using TraceSet = std::vector<std::vector<TraceEvent>>;

/// One generated trace per core. Core c uses workload seed mix_seed(seed, c),
/// so every core touches its own pattern over the same footprint.
TraceSet make_traces(const SimConfig& config);

SimStats run_once(const SimConfig& config, const TraceSet& traces);

/// One CSV row: a run plus its normalization against the E-FAM and I-FAM
/// runs of the same configuration (when those were run).
struct ResultRow {
    std::string axis;
    std::string value;
    SimStats stats;
    std::optional<double> norm_perf;
    std::optional<double> speedup_vs_ifam;
};

/// All four schemes on the same traces, in kAllSchemes order.
std::vector<ResultRow> compare(const SimConfig& config, const TraceSet& traces);
std::vector<ResultRow> compare(const SimConfig& config);

/// One row per value for config.scheme, each normalized against E-FAM and
/// I-FAM runs of the same point. Traces are regenerated per point because
/// the core count can change along the axis; explicit traces are reused.
std::vector<ResultRow> sweep(const SimConfig& config, const std::string& axis, const std::vector<std::string>& values,
                             const TraceSet* traces = nullptr);

/// Splits "a,b,c" (whitespace tolerant). Throws ConfigError when empty.
std::vector<std::string> split_values(const std::string& list);

std::string csv_header();
std::string csv_row(const ResultRow& row);
void write_csv(std::ostream& out, const std::vector<ResultRow>& rows);
/// Human-readable table of the headline metrics.
void write_summary(std::ostream& out, const std::vector<ResultRow>& rows);

} // namespace deact
