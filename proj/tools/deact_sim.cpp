// deact-sim: run, compare and sweep the memory-access-control schemes.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "deact/config.hpp"
#include "deact/experiment.hpp"
#include "deact/workload.hpp"

namespace {

enum Exit { Ok = 0, Failure = 1, BadInput = 2, Protocol = 3 };

struct Options {
    std::string config;
    std::optional<std::string> scheme;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::vector<std::string> traces;
    std::vector<std::string> sets;
    std::string axis;
    std::string values;
    unsigned core = 0;
};

void add_common(CLI::App* cmd, Options& o)
{
    cmd->add_option("--config", o.config, "YAML configuration file (omitted keys take the defaults)");
    cmd->add_option("--scheme", o.scheme, "efam, ifam, deact-w or deact-n");
    cmd->add_option("--seed", o.seed, "Run seed; also reseeds the workload generator");
    cmd->add_option("--set", o.sets, "Override one key, e.g. --set stu_entries=256 (repeatable)");
    cmd->add_option("--out", o.out, "Write CSV (or, for gen-trace, the trace) to this path");
}

deact::SimConfig build_config(const Options& o)
{
    deact::SimConfig c = o.config.empty() ? deact::SimConfig{} : deact::load_config(o.config);
    if (o.scheme)
        c.scheme = deact::parse_scheme(*o.scheme);
    if (o.seed) {
        c.seed = *o.seed;
        c.workload.seed = *o.seed;
    }
    for (const auto& kv : o.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw deact::ConfigError(fmt::format("--set: expected key=value, got '{}'", kv));
        deact::set_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (auto issues = deact::validate(c); !issues.empty())
        throw deact::ConfigError(std::move(issues));
    return c;
}

std::optional<deact::TraceSet> load_traces(const Options& o)
{
    if (o.traces.empty())
        return std::nullopt;
    deact::TraceSet set;
    for (const auto& path : o.traces)
        set.push_back(deact::load_trace(path));
    return set;
}

void emit(const Options& o, const std::vector<deact::ResultRow>& rows)
{
    deact::write_summary(std::cout, rows);
    if (o.out.empty()) {
        std::cout << '\n';
        deact::write_csv(std::cout, rows);
        return;
    }
    std::ofstream f(o.out);
    if (!f)
        throw std::runtime_error(fmt::format("cannot open {} for writing", o.out));
    deact::write_csv(f, rows);
}

int cmd_run(const Options& o)
{
    const auto cfg = build_config(o);
    const auto traces = load_traces(o);
    deact::ResultRow row{"run", std::string(deact::to_string(cfg.scheme)),
                         deact::run_once(cfg, traces ? *traces : deact::make_traces(cfg)), {}, {}};
    emit(o, {row});
    return Ok;
}

int cmd_compare(const Options& o)
{
    const auto cfg = build_config(o);
    const auto traces = load_traces(o);
    emit(o, traces ? deact::compare(cfg, *traces) : deact::compare(cfg));
    return Ok;
}

int cmd_sweep(const Options& o)
{
    const auto cfg = build_config(o);
    const auto traces = load_traces(o);
    emit(o, deact::sweep(cfg, o.axis, deact::split_values(o.values), traces ? &*traces : nullptr));
    return Ok;
}

int cmd_gen_trace(const Options& o)
{
    const auto cfg = build_config(o);
    if (o.core >= cfg.total_cores())
        throw deact::ConfigError(fmt::format("--core: {} is out of range (0..{})", o.core, cfg.total_cores() - 1));
    deact::WorkloadSpec spec = cfg.workload;
    spec.seed = deact::mix_seed(cfg.workload.seed, o.core);
    const auto events = deact::generate(spec);
    if (o.out.empty()) {
        deact::write_trace(std::cout, events);
        return Ok;
    }
    std::ofstream f(o.out);
    if (!f)
        throw std::runtime_error(fmt::format("cannot open {} for writing", o.out));
    deact::write_trace(f, events);
    return Ok;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Trace-driven simulator of FAM access-control schemes"};
    app.require_subcommand(1);
    Options o;

    auto* run = app.add_subcommand("run", "Run one scheme and report its counters");
    add_common(run, o);
    run->add_option("--trace", o.traces, "Trace file for the next core (repeatable)");

    auto* compare = app.add_subcommand("compare", "Run all four schemes on the same workload");
    add_common(compare, o);
    compare->add_option("--trace", o.traces, "Trace file for the next core (repeatable)");

    auto* sweep = app.add_subcommand("sweep", "Vary one key and normalize against E-FAM and I-FAM");
    add_common(sweep, o);
    sweep->add_option("--trace", o.traces, "Trace file for the next core (repeatable)");
    sweep->add_option("--axis", o.axis, "Key to vary")->required();
    sweep->add_option("--values", o.values, "Comma separated values")->required();

    auto* gen = app.add_subcommand("gen-trace", "Write the generated trace of one core");
    add_common(gen, o);
    gen->add_option("--core", o.core, "Core index");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run)
            return cmd_run(o);
        if (*compare)
            return cmd_compare(o);
        if (*sweep)
            return cmd_sweep(o);
        return cmd_gen_trace(o);
    } catch (const deact::ConfigError& e) {
        std::cerr << "configuration error:\n";
        for (const auto& issue : e.issues())
            std::cerr << "  " << issue << '\n';
        return BadInput;
    } catch (const deact::TraceParseError& e) {
        std::cerr << "trace error: " << e.what() << '\n';
        return BadInput;
    } catch (const deact::ProtocolViolation& e) {
        std::cerr << "protocol violation: " << e.what() << '\n';
        return Protocol;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return Failure;
    }
}
