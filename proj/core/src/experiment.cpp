#include "deact/experiment.hpp"

#include <algorithm>
#include <ostream>

#include <fmt/format.h>

#include "deact/engine.hpp"

namespace deact {

TraceSet make_traces(const SimConfig& config)
{
    TraceSet traces;
    traces.reserve(config.total_cores());
    for (unsigned c = 0; c < config.total_cores(); ++c) {
        WorkloadSpec spec = config.workload;
        spec.seed = mix_seed(config.workload.seed, c);
        traces.push_back(generate(spec));
    }
    return traces;
}

SimStats run_once(const SimConfig& config, const TraceSet& traces)
{
    Simulator sim(config, traces);
    return sim.run();
}

namespace {

std::optional<double> speed_ratio(const SimStats& base, const SimStats& s)
{
    if (s.measured_ticks == 0)
        return std::nullopt;
    return static_cast<double>(base.measured_ticks) / static_cast<double>(s.measured_ticks);
}

SimConfig with_scheme(SimConfig c, Scheme s)
{
    c.scheme = s;
    return c;
}

std::string fmt_opt(const std::optional<double>& v)
{
    return v ? fmt::format("{:.6f}", *v) : std::string{};
}

} // namespace

std::vector<ResultRow> compare(const SimConfig& config, const TraceSet& traces)
{
    std::vector<ResultRow> rows;
    for (Scheme s : kAllSchemes)
        rows.push_back(ResultRow{"scheme", std::string(to_string(s)), run_once(with_scheme(config, s), traces), {}, {}});
    const SimStats& efam = rows[0].stats;
    const SimStats& ifam = rows[1].stats;
    for (auto& r : rows) {
        r.norm_perf = speed_ratio(efam, r.stats);
        r.speedup_vs_ifam = speed_ratio(ifam, r.stats);
    }
    return rows;
}

std::vector<ResultRow> compare(const SimConfig& config)
{
    return compare(config, make_traces(config));
}

std::vector<ResultRow> sweep(const SimConfig& config, const std::string& axis, const std::vector<std::string>& values,
                             const TraceSet* traces)
{
    const auto& axes = sweep_axes();
    if (std::find(axes.begin(), axes.end(), axis) == axes.end())
        throw ConfigError(fmt::format("axis: '{}' is not a sweep key", axis));
    if (values.empty())
        throw ConfigError("values: empty sweep value list");

    std::vector<SimConfig> points;
    for (const auto& v : values) {
        SimConfig c = config;
        set_config_value(c, axis, v);
        if (auto issues = validate(c); !issues.empty())
            throw ConfigError(std::move(issues));
        points.push_back(std::move(c));
    }

    std::vector<ResultRow> rows;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const SimConfig& c = points[i];
        const TraceSet generated = traces ? TraceSet{} : make_traces(c);
        const TraceSet& t = traces ? *traces : generated;
        const SimStats efam = run_once(with_scheme(c, Scheme::EFam), t);
        const SimStats ifam = run_once(with_scheme(c, Scheme::IFam), t);
        SimStats s = c.scheme == Scheme::EFam   ? efam
                     : c.scheme == Scheme::IFam ? ifam
                                                : run_once(c, t);
        ResultRow row{axis, values[i], std::move(s), {}, {}};
        row.norm_perf = speed_ratio(efam, row.stats);
        row.speedup_vs_ifam = speed_ratio(ifam, row.stats);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<std::string> split_values(const std::string& list)
{
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        const auto b = cur.find_first_not_of(" \t");
        const auto e = cur.find_last_not_of(" \t");
        if (b != std::string::npos)
            out.push_back(cur.substr(b, e - b + 1));
        cur.clear();
    };
    for (char ch : list) {
        if (ch == ',')
            flush();
        else
            cur += ch;
    }
    flush();
    if (out.empty())
        throw ConfigError("values: empty sweep value list");
    return out;
}

std::string csv_header()
{
    std::string h = "scheme,seed,axis,value,ns,total_ns,norm_perf,speedup_vs_ifam,"
                    "translation_hit_rate,acm_hit_rate,at_fraction,tlb_hit_rate,fam_requests,at_requests";
    for (std::size_t i = 0; i < kCounterCount; ++i) {
        h += ',';
        h += counter_name(static_cast<Counter>(i));
    }
    return h;
}

std::string csv_row(const ResultRow& r)
{
    const SimStats& s = r.stats;
    std::string line = fmt::format("{},{},{},{},{:.3f},{:.3f},{},{},{},{},{},{},{},{}", s.scheme, s.seed, r.axis,
                                   r.value, s.ns(), s.total_ns(), fmt_opt(r.norm_perf), fmt_opt(r.speedup_vs_ifam),
                                   fmt_opt(s.translation_hit_rate()), fmt_opt(s.acm_hit_rate()),
                                   fmt_opt(s.at_fraction()), fmt_opt(s.tlb_hit_rate()), s.fam_requests(),
                                   s.at_requests());
    for (std::uint64_t v : s.total.values())
        line += fmt::format(",{}", v);
    return line;
}

void write_csv(std::ostream& out, const std::vector<ResultRow>& rows)
{
    out << csv_header() << '\n';
    for (const auto& r : rows)
        out << csv_row(r) << '\n';
}

void write_summary(std::ostream& out, const std::vector<ResultRow>& rows)
{
    auto pct = [](const std::optional<double>& v) { return v ? fmt::format("{:.2f}%", *v * 100) : std::string("-"); };
    auto x = [](const std::optional<double>& v) { return v ? fmt::format("{:.3f}x", *v) : std::string("-"); };
    out << fmt::format("{:<9} {:<14} {:>14} {:>9} {:>9} {:>9} {:>9} {:>10} {:>10}\n", "scheme", "point", "ns",
                       "trans_hit", "acm_hit", "at_frac", "tlb_hit", "vs_efam", "vs_ifam");
    for (const auto& r : rows) {
        const SimStats& s = r.stats;
        out << fmt::format("{:<9} {:<14} {:>14.1f} {:>9} {:>9} {:>9} {:>9} {:>10} {:>10}\n", s.scheme,
                           r.axis == "scheme" ? std::string("-") : r.axis + "=" + r.value, s.ns(),
                           pct(s.translation_hit_rate()), pct(s.acm_hit_rate()), pct(s.at_fraction()),
                           pct(s.tlb_hit_rate()), x(r.norm_perf), x(r.speedup_vs_ifam));
    }
}

} // namespace deact
