#include "deact/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

namespace deact {

namespace {

std::string join_issues(const std::vector<std::string>& issues)
{
    std::string out = "invalid configuration";
    for (const auto& i : issues)
        out += "\n  " + i;
    return out;
}

struct FieldError {
    std::string what;
};

template <class T>
T scalar(const YAML::Node& n)
{
    if (!n.IsScalar())
        throw FieldError{"expected a scalar"};
    try {
        return n.as<T>();
    } catch (const YAML::Exception&) {
        throw FieldError{fmt::format("cannot read '{}' as a number", n.Scalar())};
    }
}

template <>
bool scalar<bool>(const YAML::Node& n)
{
    if (!n.IsScalar())
        throw FieldError{"expected true or false"};
    try {
        return n.as<bool>();
    } catch (const YAML::Exception&) {
        throw FieldError{fmt::format("cannot read '{}' as a boolean", n.Scalar())};
    }
}

std::uint64_t unsigned_value(const YAML::Node& n)
{
    if (!n.IsScalar())
        throw FieldError{"expected a non-negative integer"};
    const std::string& s = n.Scalar();
    if (s.empty() || s[0] == '-')
        throw FieldError{fmt::format("'{}' is not a non-negative integer", s)};
    return scalar<std::uint64_t>(n);
}

std::uint64_t bytes_value(const YAML::Node& n)
{
    if (!n.IsScalar())
        throw FieldError{"expected a byte count"};
    try {
        return parse_bytes(n.Scalar());
    } catch (const std::invalid_argument& e) {
        throw FieldError{e.what()};
    }
}

Perm parse_perm(std::string_view s)
{
    if (s == "R" || s == "r")
        return Perm::R;
    if (s == "RW" || s == "rw")
        return Perm::RW;
    if (s == "RWX" || s == "rwx")
        return Perm::RWX;
    throw FieldError{fmt::format("unknown permission '{}' (expected R, RW or RWX)", s)};
}

using Setter = std::function<void(SimConfig&, const YAML::Node&)>;

template <class T>
Setter set_unsigned(T SimConfig::*field)
{
    return [field](SimConfig& c, const YAML::Node& n) { c.*field = static_cast<T>(unsigned_value(n)); };
}

Setter set_double(double SimConfig::*field)
{
    return [field](SimConfig& c, const YAML::Node& n) { c.*field = scalar<double>(n); };
}

Setter set_bytes(std::uint64_t SimConfig::*field)
{
    return [field](SimConfig& c, const YAML::Node& n) { c.*field = bytes_value(n); };
}

const std::map<std::string, Setter, std::less<>>& setters()
{
    static const std::map<std::string, Setter, std::less<>> table = {
        {"scheme",
         [](SimConfig& c, const YAML::Node& n) {
             try {
                 c.scheme = parse_scheme(scalar<std::string>(n));
             } catch (const std::invalid_argument& e) {
                 throw FieldError{e.what()};
             }
         }},
        {"seed", set_unsigned(&SimConfig::seed)},
        {"nodes", set_unsigned(&SimConfig::nodes)},
        {"cores_per_node", set_unsigned(&SimConfig::cores_per_node)},
        {"cpu_ghz", set_double(&SimConfig::cpu_ghz)},
        {"max_outstanding", set_unsigned(&SimConfig::max_outstanding)},
        {"tlb_l1_entries", set_unsigned(&SimConfig::tlb_l1_entries)},
        {"tlb_l2_entries", set_unsigned(&SimConfig::tlb_l2_entries)},
        {"tlb_l2_ways", set_unsigned(&SimConfig::tlb_l2_ways)},
        {"tlb_l1_cycles", set_unsigned(&SimConfig::tlb_l1_cycles)},
        {"tlb_l2_cycles", set_unsigned(&SimConfig::tlb_l2_cycles)},
        {"ptw_cache_entries", set_unsigned(&SimConfig::ptw_cache_entries)},
        {"minor_fault_ns", set_double(&SimConfig::minor_fault_ns)},
        {"local_size", set_bytes(&SimConfig::local_size)},
        {"fam_view_size", set_bytes(&SimConfig::fam_view_size)},
        {"local_banks", set_unsigned(&SimConfig::local_banks)},
        {"local_read_ns", set_double(&SimConfig::local_read_ns)},
        {"local_write_ns", set_double(&SimConfig::local_write_ns)},
        {"local_max_outstanding", set_unsigned(&SimConfig::local_max_outstanding)},
        {"fam_capacity", set_bytes(&SimConfig::fam_capacity)},
        {"fam_banks", set_unsigned(&SimConfig::fam_banks)},
        {"fam_read_ns", set_double(&SimConfig::fam_read_ns)},
        {"fam_write_ns", set_double(&SimConfig::fam_write_ns)},
        {"fam_max_outstanding", set_unsigned(&SimConfig::fam_max_outstanding)},
        {"fabric_latency_ns", set_double(&SimConfig::fabric_latency_ns)},
        {"fabric_serialization_ns", set_double(&SimConfig::fabric_serialization_ns)},
        {"stu_entries", set_unsigned(&SimConfig::stu_entries)},
        {"stu_ways", set_unsigned(&SimConfig::stu_ways)},
        {"acm_bits", set_unsigned(&SimConfig::acm_bits)},
        {"pairs_per_way", set_unsigned(&SimConfig::pairs_per_way)},
        {"stu_max_walks", set_unsigned(&SimConfig::stu_max_walks)},
        {"stu_lookup_ns", set_double(&SimConfig::stu_lookup_ns)},
        {"stu_hop_ns", set_double(&SimConfig::stu_hop_ns)},
        {"translation_cache_bytes", set_bytes(&SimConfig::translation_cache_bytes)},
        {"translator_compare_cycles", set_unsigned(&SimConfig::translator_compare_cycles)},
        {"oml_capacity", set_unsigned(&SimConfig::oml_capacity)},
        {"local_fraction", set_double(&SimConfig::local_fraction)},
        {"placement",
         [](SimConfig& c, const YAML::Node& n) {
             const auto s = scalar<std::string>(n);
             if (s == "random")
                 c.placement = Placement::Random;
             else if (s == "first_fit")
                 c.placement = Placement::FirstFit;
             else
                 throw FieldError{fmt::format("unknown placement '{}' (expected random or first_fit)", s)};
         }},
        {"tables_follow_split",
         [](SimConfig& c, const YAML::Node& n) { c.tables_follow_split = scalar<bool>(n); }},
        {"shared_region_bytes", set_bytes(&SimConfig::shared_region_bytes)},
        {"warmup_events", set_unsigned(&SimConfig::warmup_events)},
        {"workload.generator",
         [](SimConfig& c, const YAML::Node& n) {
             try {
                 c.workload.generator = parse_generator(scalar<std::string>(n));
             } catch (const std::invalid_argument& e) {
                 throw FieldError{e.what()};
             }
         }},
        {"workload.footprint", [](SimConfig& c, const YAML::Node& n) { c.workload.footprint = bytes_value(n); }},
        {"workload.rw_ratio", [](SimConfig& c, const YAML::Node& n) { c.workload.rw_ratio = scalar<double>(n); }},
        {"workload.mpki_target",
         [](SimConfig& c, const YAML::Node& n) { c.workload.mpki_target = scalar<double>(n); }},
        {"workload.length", [](SimConfig& c, const YAML::Node& n) { c.workload.length = unsigned_value(n); }},
        {"workload.seed", [](SimConfig& c, const YAML::Node& n) { c.workload.seed = unsigned_value(n); }},
        {"workload.zipf_skew", [](SimConfig& c, const YAML::Node& n) { c.workload.zipf_skew = scalar<double>(n); }},
        {"workload.stream_stride",
         [](SimConfig& c, const YAML::Node& n) { c.workload.stream_stride = bytes_value(n); }},
        {"workload.chain_length",
         [](SimConfig& c, const YAML::Node& n) { c.workload.chain_length = unsigned_value(n); }},
    };
    return table;
}

void apply(SimConfig& c, const std::string& key, const YAML::Node& value, std::vector<std::string>& issues)
{
    const auto& table = setters();
    auto it = table.find(key);
    if (it == table.end()) {
        issues.push_back(fmt::format("{}: unknown key", key));
        return;
    }
    try {
        it->second(c, value);
    } catch (const FieldError& e) {
        issues.push_back(fmt::format("{}: {}", key, e.what));
    }
}

void parse_shared_regions(SimConfig& c, const YAML::Node& list, std::vector<std::string>& issues)
{
    if (!list.IsSequence()) {
        issues.push_back("shared_regions: expected a list");
        return;
    }
    for (std::size_t i = 0; i < list.size(); ++i) {
        const YAML::Node& item = list[i];
        const std::string where = fmt::format("shared_regions[{}]", i);
        if (!item.IsMap()) {
            issues.push_back(where + ": expected a map");
            continue;
        }
        SharedRegionSpec spec;
        for (const auto& kv : item) {
            const auto key = kv.first.as<std::string>();
            try {
                if (key == "members") {
                    if (!kv.second.IsSequence())
                        throw FieldError{"expected a list of node ids"};
                    for (const auto& m : kv.second)
                        spec.members.push_back(static_cast<NodeId>(unsigned_value(m)));
                } else if (key == "perm") {
                    spec.perm = parse_perm(scalar<std::string>(kv.second));
                } else if (key == "va_base") {
                    spec.va_base = bytes_value(kv.second);
                } else {
                    throw FieldError{"unknown key"};
                }
            } catch (const FieldError& e) {
                issues.push_back(fmt::format("{}.{}: {}", where, key, e.what));
            }
        }
        c.shared_regions.push_back(std::move(spec));
    }
}

} // namespace

ConfigError::ConfigError(std::vector<std::string> issues)
    : std::runtime_error(join_issues(issues)), issues_(std::move(issues))
{
}

std::string_view to_string(Scheme s)
{
    switch (s) {
    case Scheme::EFam: return "efam";
    case Scheme::IFam: return "ifam";
    case Scheme::DeactW: return "deact-w";
    case Scheme::DeactN: return "deact-n";
    }
    return "?";
}

Scheme parse_scheme(std::string_view name)
{
    for (Scheme s : kAllSchemes)
        if (to_string(s) == name)
            return s;
    throw std::invalid_argument(fmt::format("unknown scheme '{}' (expected efam, ifam, deact-w or deact-n)", name));
}

unsigned SimConfig::effective_pairs() const
{
    if (pairs_per_way != 0)
        return pairs_per_way;
    return acm_bits == 32 ? 1 : 2;
}

std::uint64_t parse_bytes(std::string_view text)
{
    std::size_t i = 0;
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])))
        ++i;
    if (text.substr(i).starts_with("0x") || text.substr(i).starts_with("0X")) {
        std::uint64_t value = 0;
        const std::string_view hex = text.substr(i + 2);
        auto [ptr, ec] = std::from_chars(hex.data(), hex.data() + hex.size(), value, 16);
        if (ec != std::errc{} || ptr != hex.data() + hex.size())
            throw std::invalid_argument(fmt::format("'{}' is not a byte count", text));
        return value;
    }
    const std::size_t start = i;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])))
        ++i;
    if (i == start)
        throw std::invalid_argument(fmt::format("'{}' is not a byte count", text));
    std::uint64_t value = 0;
    for (std::size_t k = start; k < i; ++k) {
        const std::uint64_t next = value * 10 + static_cast<std::uint64_t>(text[k] - '0');
        if (next / 10 != value)
            throw std::invalid_argument(fmt::format("'{}' overflows", text));
        value = next;
    }
    std::string suffix;
    for (; i < text.size(); ++i)
        if (!std::isspace(static_cast<unsigned char>(text[i])))
            suffix += static_cast<char>(std::toupper(static_cast<unsigned char>(text[i])));
    std::uint64_t scale = 1;
    if (suffix.empty() || suffix == "B")
        scale = 1;
    else if (suffix == "K" || suffix == "KB" || suffix == "KIB")
        scale = KiB;
    else if (suffix == "M" || suffix == "MB" || suffix == "MIB")
        scale = MiB;
    else if (suffix == "G" || suffix == "GB" || suffix == "GIB")
        scale = GiB;
    else
        throw std::invalid_argument(fmt::format("'{}' has an unknown size suffix", text));
    if (value > UINT64_MAX / scale)
        throw std::invalid_argument(fmt::format("'{}' overflows", text));
    return value * scale;
}

std::vector<std::string> validate(const SimConfig& c)
{
    std::vector<std::string> issues;
    auto need = [&](bool ok, std::string msg) {
        if (!ok)
            issues.push_back(std::move(msg));
    };
    const AcmFormat format(c.acm_bits == 8 || c.acm_bits == 16 || c.acm_bits == 32 ? c.acm_bits : 16);

    need(c.nodes >= 1, "nodes: must be at least 1");
    need(c.nodes <= format.max_nodes(), fmt::format("nodes: at most {} with {}-bit ACM", format.max_nodes(), c.acm_bits));
    need(c.cores_per_node >= 1, "cores_per_node: must be at least 1");
    need(c.cpu_ghz > 0, "cpu_ghz: must be positive");
    need(c.max_outstanding >= 1, "max_outstanding: must be at least 1");

    need(c.tlb_l1_entries >= 1, "tlb_l1_entries: must be at least 1");
    need(c.tlb_l2_ways >= 1 && c.tlb_l2_entries >= c.tlb_l2_ways && c.tlb_l2_entries % std::max<std::size_t>(c.tlb_l2_ways, 1) == 0,
         "tlb_l2_ways: must divide tlb_l2_entries");
    need(c.ptw_cache_entries >= 1, "ptw_cache_entries: must be at least 1");
    need(c.minor_fault_ns >= 0, "minor_fault_ns: must be non-negative");

    need(c.local_size >= 2 * MiB && c.local_size % kPageSize == 0, "local_size: must be a multiple of 4KB and at least 2MB");
    need(c.fam_view_size >= kPageSize && c.fam_view_size % kPageSize == 0, "fam_view_size: must be a non-zero multiple of 4KB");
    need(c.local_banks >= 1, "local_banks: must be at least 1");
    need(c.local_read_ns >= 0 && c.local_write_ns >= 0, "local_read_ns/local_write_ns: must be non-negative");
    need(c.local_max_outstanding >= 1, "local_max_outstanding: must be at least 1");

    need(c.shared_region_bytes >= kPageSize && c.shared_region_bytes % kPageSize == 0,
         "shared_region_bytes: must be a non-zero multiple of 4KB");
    need(c.fam_capacity % kPageSize == 0 && c.fam_capacity >= 4 * kPageSize, "fam_capacity: must be a multiple of 4KB and at least 16KB");
    if (issues.empty()) {
        try {
            (void)make_region_layout(c.fam_capacity, format.bits(), c.shared_region_bytes);
        } catch (const std::invalid_argument& e) {
            issues.push_back(fmt::format("fam_capacity: {}", e.what()));
        }
    }
    need(c.fam_banks >= 1, "fam_banks: must be at least 1");
    need(c.fam_read_ns >= 0 && c.fam_write_ns >= 0, "fam_read_ns/fam_write_ns: must be non-negative");
    need(c.fam_max_outstanding >= 1, "fam_max_outstanding: must be at least 1");

    need(c.fabric_latency_ns >= 0, "fabric_latency_ns: must be non-negative");
    need(c.fabric_serialization_ns >= 0, "fabric_serialization_ns: must be non-negative");

    need(c.stu_entries >= 1, "stu_entries: must be at least 1");
    need(c.stu_ways >= 1 && c.stu_entries % std::max<std::size_t>(c.stu_ways, 1) == 0,
         fmt::format("stu_ways: {} does not divide stu_entries {}", c.stu_ways, c.stu_entries));
    need(c.acm_bits == 8 || c.acm_bits == 16 || c.acm_bits == 32, fmt::format("acm_bits: {} not in {{8, 16, 32}}", c.acm_bits));
    const unsigned max_pairs = c.acm_bits == 8 ? 3 : c.acm_bits == 16 ? 2 : 1;
    need(c.pairs_per_way <= max_pairs,
         fmt::format("pairs_per_way: {} exceeds {} for {}-bit ACM", c.pairs_per_way, max_pairs, c.acm_bits));
    if (c.pairs_per_way <= 3) {
        const unsigned tag_bits = c.effective_pairs() == 1 ? 52 : c.effective_pairs() == 2 ? 44 : 32;
        need(tag_bits >= 52 || (c.fam_capacity >> kPageShift) <= (std::uint64_t{1} << tag_bits),
             fmt::format("fam_capacity: does not fit the {}-bit STU tag", tag_bits));
    }
    need(c.stu_max_walks >= 1, "stu_max_walks: must be at least 1");
    need(c.stu_lookup_ns >= 0, "stu_lookup_ns: must be non-negative");
    need(c.stu_hop_ns >= 0 && c.stu_hop_ns <= c.fabric_latency_ns,
         "stu_hop_ns: must lie between 0 and fabric_latency_ns");

    need(c.translation_cache_bytes >= kBlockSize && c.translation_cache_bytes % kBlockSize == 0,
         "translation_cache_bytes: must be a non-zero multiple of 64");
    need(c.translation_cache_bytes <= c.local_size / 2, "translation_cache_bytes: must fit in half of local_size");
    need(c.oml_capacity >= 1, "oml_capacity: must be at least 1");

    need(c.local_fraction >= 0 && c.local_fraction <= 1, "local_fraction: must lie in [0, 1]");

    for (std::size_t i = 0; i < c.shared_regions.size(); ++i) {
        const auto& r = c.shared_regions[i];
        need(!r.members.empty(), fmt::format("shared_regions[{}].members: must not be empty", i));
        for (NodeId m : r.members)
            need(m < format.max_nodes(), fmt::format("shared_regions[{}].members: node {} out of range", i, m));
        need(r.va_base % kPageSize == 0, fmt::format("shared_regions[{}].va_base: must be 4KB aligned", i));
    }

    for (auto& issue : c.workload.validate())
        issues.push_back(issue);
    return issues;
}

SimConfig parse_config(std::string_view text)
{
    YAML::Node root;
    try {
        root = YAML::Load(std::string(text));
    } catch (const YAML::Exception& e) {
        throw ConfigError(fmt::format("syntax error: {}", e.what()));
    }
    SimConfig c;
    std::vector<std::string> issues;
    if (root.IsNull()) {
        // empty document: all defaults
    } else if (!root.IsMap()) {
        throw ConfigError("top level must be a map");
    } else {
        for (const auto& kv : root) {
            const auto key = kv.first.as<std::string>();
            if (key == "workload") {
                if (!kv.second.IsMap()) {
                    issues.push_back("workload: expected a map");
                    continue;
                }
                for (const auto& wkv : kv.second)
                    apply(c, "workload." + wkv.first.as<std::string>(), wkv.second, issues);
            } else if (key == "shared_regions") {
                parse_shared_regions(c, kv.second, issues);
            } else {
                apply(c, key, kv.second, issues);
            }
        }
    }
    if (issues.empty())
        issues = validate(c);
    if (!issues.empty())
        throw ConfigError(std::move(issues));
    return c;
}

SimConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError(fmt::format("cannot open config file {}", path.string()));
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

const std::vector<std::string>& sweep_axes()
{
    static const std::vector<std::string> axes = {
        "stu_entries",       "stu_ways", "acm_bits", "pairs_per_way", "fabric_latency_ns",
        "nodes",             "translation_cache_bytes",
    };
    return axes;
}

void set_config_value(SimConfig& config, std::string_view key, std::string_view value)
{
    std::vector<std::string> issues;
    YAML::Node node;
    try {
        node = YAML::Load(std::string(value));
    } catch (const YAML::Exception&) {
        throw ConfigError(fmt::format("{}: cannot parse '{}'", key, value));
    }
    apply(config, std::string(key), node, issues);
    if (!issues.empty())
        throw ConfigError(std::move(issues));
}

} // namespace deact
