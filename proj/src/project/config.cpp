#include "sdcnpu/project/config.hpp"

#include "sdcnpu/error.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace sdcnpu::project
{

namespace
{

using nlohmann::json;

/// A JSON object together with its key path, for error messages.
class Node
{
  public:
    Node(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object())
            throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    std::string key(std::string_view k) const { return path_.empty() ? std::string(k) : path_ + "." + std::string(k); }
    bool has(std::string_view k) const { return j_.contains(std::string(k)); }
    const json& at(std::string_view k) const { return j_.at(std::string(k)); }

    /// Rejects keys outside `allowed`.
    void only(std::initializer_list<std::string_view> allowed) const
    {
        for (const auto& [k, v] : j_.items())
            if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
                throw ConfigError(key(k), "unknown key");
    }

    Node child(std::string_view k) const { return Node(j_.at(std::string(k)), key(k)); }

    double number(std::string_view k, double fallback) const { return has(k) ? number(k) : fallback; }
    double number(std::string_view k) const
    {
        const auto& v = need(k);
        if (!v.is_number())
            throw ConfigError(key(k), "expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x))
            throw ConfigError(key(k), "expected a finite number");
        return x;
    }

    std::uint64_t count(std::string_view k, std::uint64_t fallback) const { return has(k) ? count(k) : fallback; }
    std::uint64_t count(std::string_view k) const
    {
        const auto& v = need(k);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
            throw ConfigError(key(k), "expected a non-negative integer");
        return v.get<std::uint64_t>();
    }

    std::uint32_t count32(std::string_view k, std::uint32_t fallback) const
    {
        const auto x = count(k, fallback);
        if (x > 0xFFFFFFFFu)
            throw ConfigError(key(k), "value too large");
        return static_cast<std::uint32_t>(x);
    }

    std::string text(std::string_view k, std::string fallback) const { return has(k) ? text(k) : fallback; }
    std::string text(std::string_view k) const
    {
        const auto& v = need(k);
        if (!v.is_string())
            throw ConfigError(key(k), "expected a string");
        return v.get<std::string>();
    }

    bool flag(std::string_view k, bool fallback) const
    {
        if (!has(k))
            return fallback;
        if (!at(k).is_boolean())
            throw ConfigError(key(k), "expected true or false");
        return at(k).get<bool>();
    }

  private:
    const json& need(std::string_view k) const
    {
        if (!has(k))
            throw ConfigError(key(k), "missing");
        return at(k);
    }

    const json& j_;
    std::string path_;
};

BlockId block_key(const Node& n, const std::string& k)
{
    const auto b = parse_block(k);
    if (!b)
        throw ConfigError(n.key(k), "unknown block (expected AO, DMA, MAC, REG, TSU or WD)");
    return *b;
}

double positive(const Node& n, std::string_view k, double x)
{
    if (!(x > 0.0))
        throw ConfigError(n.key(k), "must be positive");
    return x;
}

double unit_open(const Node& n, std::string_view k, double x)
{
    if (!(x > 0.0 && x < 1.0))
        throw ConfigError(n.key(k), "must lie in (0, 1)");
    return x;
}

npu::NpuConfig parse_npu(const Node& n)
{
    n.only({"mac_rows", "mac_cols", "buffer_bytes", "watchdog_factor", "register_widths"});
    npu::NpuConfig c;
    c.mac_rows = n.count32("mac_rows", c.mac_rows);
    c.mac_cols = n.count32("mac_cols", c.mac_cols);
    c.buffer_bytes = n.count32("buffer_bytes", c.buffer_bytes);
    c.watchdog_factor = n.number("watchdog_factor", c.watchdog_factor);
    if (n.has("register_widths"))
    {
        const Node w = n.child("register_widths");
        for (const auto& [k, v] : n.at("register_widths").items())
            c.register_widths[k] = w.count32(k, 0);
    }
    return c;
}

reliability::TechNode parse_tech(const json& j, const std::string& path)
{
    if (j.is_string())
    {
        const auto node = reliability::find_tech_node(j.get<std::string>());
        if (!node)
            throw ConfigError(path, fmt::format("unknown technology preset '{}'", j.get<std::string>()));
        return *node;
    }
    const Node n(j, path);
    n.only({"preset", "name", "voltage_v", "fom_pct", "cross_section_area_cm2", "critical_charge_fc",
            "ff_fit_rate_fit_per_mb", "flux"});
    reliability::TechNode t;
    if (n.has("preset"))
    {
        const auto node = reliability::find_tech_node(n.text("preset"));
        if (!node)
            throw ConfigError(n.key("preset"), "unknown technology preset");
        t = *node;
    }
    t.name = n.text("name", t.name);
    t.voltage = n.number("voltage_v", t.voltage);
    t.fom_pct = n.number("fom_pct", t.fom_pct);
    t.cross_section_cm2 = n.number("cross_section_area_cm2", t.cross_section_cm2);
    t.qcrit_fc = n.number("critical_charge_fc", t.qcrit_fc);
    t.ff_fit_per_mb = n.number("ff_fit_rate_fit_per_mb", t.ff_fit_per_mb);
    t.flux = n.number("flux", t.flux);
    if (t.name.empty())
        throw ConfigError(n.key("name"), "missing");
    try
    {
        reliability::validate(t);
    }
    catch (const DomainError& e)
    {
        throw ConfigError(path, e.what());
    }
    return t;
}

LogicFaultConfig parse_logic(const Node& n)
{
    n.only({"enabled", "alpha_source", "ld_comb", "freq_ghz", "fanin", "depth_d", "latch_factor", "block_fanin"});
    LogicFaultConfig c;
    c.enabled = n.flag("enabled", false);
    const auto src = n.text("alpha_source", "fanin");
    if (src == "fanin")
        c.source = AlphaSource::Fanin;
    else if (src == "flux")
        c.source = AlphaSource::Flux;
    else
        throw ConfigError(n.key("alpha_source"), "expected 'fanin' or 'flux'");
    auto& p = c.params;
    p.ld_comb = n.number("ld_comb", p.ld_comb);
    p.freq_ghz = n.number("freq_ghz", p.freq_ghz);
    p.fanin = n.number("fanin", p.fanin);
    p.depth_d = n.number("depth_d", p.depth_d);
    p.latch_factor = n.number("latch_factor", p.latch_factor);
    try
    {
        reliability::validate(p);
    }
    catch (const DomainError& e)
    {
        throw ConfigError("logic_faults", e.what());
    }
    if (n.has("block_fanin"))
    {
        const Node bf = n.child("block_fanin");
        for (const auto& [k, v] : n.at("block_fanin").items())
        {
            const double f = bf.number(k);
            if (!(f >= 1.0))
                throw ConfigError(bf.key(k), "fan-in must be at least 1");
            c.fanin[block_key(bf, k)] = f;
        }
    }
    return c;
}

protection::Scheme parse_scheme_entry(const json& j, const std::string& path, protection::HardeningReading reading)
{
    const auto preset = [&](const std::string& name, const std::string& key) {
        const auto kind = protection::parse_scheme(name);
        if (!kind)
            throw ConfigError(key, fmt::format("unknown scheme '{}' (expected none, quatro, dmr or tspc-dice)", name));
        switch (*kind)
        {
        case protection::SchemeKind::None: return protection::scheme_none();
        case protection::SchemeKind::QuatroHard: return protection::scheme_quatro(reading);
        case protection::SchemeKind::DMR: return protection::scheme_dmr();
        case protection::SchemeKind::TspcDiceHard: return protection::scheme_tspc_dice(reading);
        }
        return protection::scheme_none();
    };
    if (j.is_string())
        return preset(j.get<std::string>(), path);
    const Node n(j, path);
    n.only({"kind", "area_overhead_pct", "fit_ratio", "alpha_ratio"});
    auto s = preset(n.text("kind"), n.key("kind"));
    s.area_overhead_pct = n.number("area_overhead_pct", s.area_overhead_pct);
    s.fit_ratio = n.number("fit_ratio", s.fit_ratio);
    s.alpha_ratio = n.number("alpha_ratio", s.alpha_ratio);
    if (!(s.area_overhead_pct >= 0.0))
        throw ConfigError(n.key("area_overhead_pct"), "must be non-negative");
    if (!(s.fit_ratio >= 0.0 && s.fit_ratio <= 1.0))
        throw ConfigError(n.key("fit_ratio"), "must lie in [0, 1]");
    if (!(s.alpha_ratio >= 0.0 && s.alpha_ratio <= 1.0))
        throw ConfigError(n.key("alpha_ratio"), "must lie in [0, 1]");
    return s;
}

void parse_protection(const Node& n, ProjectConfig& c)
{
    n.only({"hardening_reading", "schemes", "delta_pct", "design_space_cap"});
    auto reading = protection::HardeningReading::Reduction;
    const auto r = n.text("hardening_reading", "reduction");
    if (r == "raw")
        reading = protection::HardeningReading::Raw;
    else if (r != "reduction")
        throw ConfigError(n.key("hardening_reading"), "expected 'reduction' or 'raw'");

    c.schemes.clear();
    if (n.has("schemes"))
    {
        const auto& arr = n.at("schemes");
        if (!arr.is_array() || arr.empty())
            throw ConfigError(n.key("schemes"), "expected a non-empty list");
        std::set<protection::SchemeKind> seen;
        for (std::size_t i = 0; i < arr.size(); ++i)
        {
            const auto key = fmt::format("{}[{}]", n.key("schemes"), i);
            auto s = parse_scheme_entry(arr[i], key, reading);
            if (!seen.insert(s.kind).second)
                throw ConfigError(key, "duplicate scheme");
            c.schemes.push_back(s);
        }
        std::sort(c.schemes.begin(), c.schemes.end(),
                  [](const auto& a, const auto& b) { return protection::scheme_code(a.kind) < protection::scheme_code(b.kind); });
    }
    else
        c.schemes = protection::default_schemes(reading);

    if (n.has("delta_pct"))
    {
        const double d = n.number("delta_pct");
        if (!(d >= 0.0))
            throw ConfigError(n.key("delta_pct"), "must be non-negative");
        c.delta_pct = d;
    }
    if (n.has("design_space_cap"))
    {
        c.design_space_cap = n.count("design_space_cap");
        if (c.design_space_cap == 0)
            throw ConfigError(n.key("design_space_cap"), "must be positive");
    }
}

void parse_areas(const Node& n, ProjectConfig& c)
{
    n.only({"blocks", "fixed"});
    c.fixed_area = n.number("fixed", 0.0);
    if (!(c.fixed_area >= 0.0))
        throw ConfigError(n.key("fixed"), "must be non-negative");
    const Node blocks = n.child("blocks");
    PerBlock<bool> seen{};
    for (const auto& [k, v] : n.at("blocks").items())
    {
        const BlockId b = block_key(blocks, k);
        const Node e = blocks.child(k);
        e.only({"area", "ff_fraction"});
        auto& a = c.areas[index_of(b)];
        a.total_area = positive(e, "area", e.number("area"));
        a.ff_fraction = e.number("ff_fraction", 1.0);
        if (!(a.ff_fraction > 0.0 && a.ff_fraction <= 1.0))
            throw ConfigError(e.key("ff_fraction"), "must lie in (0, 1]");
        seen[index_of(b)] = true;
    }
    for (BlockId b : kAllBlocks)
        if (!seen[index_of(b)])
            throw ConfigError(blocks.key(block_name(b)), "missing");
}

SamplingConfig parse_sampling(const Node& n)
{
    n.only({"seed", "margin", "confidence", "p", "allocation", "fraction", "counts", "registers", "blocks"});
    SamplingConfig s;
    s.seed = n.count("seed", s.seed);
    s.margin = unit_open(n, "margin", n.number("margin", s.margin));
    s.confidence = unit_open(n, "confidence", n.number("confidence", s.confidence));
    s.p = unit_open(n, "p", n.number("p", s.p));
    const auto mode = n.text("allocation", "proportional");
    if (mode == "proportional")
        s.allocation = Allocation::Proportional;
    else if (mode == "fraction")
        s.allocation = Allocation::Fraction;
    else if (mode == "explicit")
        s.allocation = Allocation::Explicit;
    else
        throw ConfigError(n.key("allocation"), "expected proportional, fraction or explicit");
    s.fraction = n.number("fraction", s.fraction);
    if (!(s.fraction > 0.0 && s.fraction <= 1.0))
        throw ConfigError(n.key("fraction"), "must lie in (0, 1]");

    if (n.has("blocks"))
    {
        const auto& arr = n.at("blocks");
        if (!arr.is_array() || arr.empty())
            throw ConfigError(n.key("blocks"), "expected a non-empty list of block names");
        std::set<BlockId> chosen;
        for (std::size_t i = 0; i < arr.size(); ++i)
        {
            const auto key = fmt::format("{}[{}]", n.key("blocks"), i);
            const auto b = arr[i].is_string() ? parse_block(arr[i].get<std::string>()) : std::nullopt;
            if (!b)
                throw ConfigError(key, "unknown block");
            chosen.insert(*b);
        }
        s.blocks.assign(chosen.begin(), chosen.end());
    }
    if (n.has("counts"))
    {
        const Node counts = n.child("counts");
        for (const auto& [k, v] : n.at("counts").items())
            s.counts[block_key(counts, k)] = counts.count(k);
    }
    if (s.allocation == Allocation::Explicit)
        for (BlockId b : s.blocks)
            if (!s.counts.count(b))
                throw ConfigError(n.key("counts") + "." + std::string(block_name(b)), "missing for explicit allocation");
    if (n.has("registers"))
    {
        const Node regs = n.child("registers");
        for (const auto& [k, v] : n.at("registers").items())
        {
            const BlockId b = block_key(regs, k);
            if (!v.is_array())
                throw ConfigError(regs.key(k), "expected a list of register names");
            std::vector<std::string> names;
            for (const auto& r : v)
            {
                if (!r.is_string())
                    throw ConfigError(regs.key(k), "expected a list of register names");
                names.push_back(r.get<std::string>());
            }
            s.registers[b] = std::move(names);
        }
    }
    return s;
}

AsilConfig parse_asil_section(const Node& n)
{
    n.only({"level", "source", "area_fraction", "inference_time_s"});
    AsilConfig a;
    const auto level = reliability::parse_asil(n.text("level", "D"));
    if (!level)
        throw ConfigError(n.key("level"), "expected B, C or D");
    a.level = *level;
    const auto src = n.text("source", "published");
    if (src == "published")
        a.source = AsilSource::Published;
    else if (src == "derived")
        a.source = AsilSource::Derived;
    else
        throw ConfigError(n.key("source"), "expected 'published' or 'derived'");
    if (n.has("area_fraction"))
    {
        const double f = n.number("area_fraction");
        if (!(f > 0.0 && f <= 1.0))
            throw ConfigError(n.key("area_fraction"), "must lie in (0, 1]");
        a.area_fraction = f;
    }
    if (n.has("inference_time_s"))
        a.inference_time_s = positive(n, "inference_time_s", n.number("inference_time_s"));
    return a;
}

} // namespace

ProjectConfig parse_project(const nlohmann::json& doc, const std::filesystem::path& base_dir)
{
    const Node root(doc, "");
    root.only({"npu", "workload", "tech_node", "freq_ghz", "mac_config", "logic_faults", "protection", "areas",
               "sampling", "asil"});
    ProjectConfig c;
    if (root.has("npu"))
        c.npu = parse_npu(root.child("npu"));

    if (!root.has("workload"))
        throw ConfigError("workload", "missing");
    const auto& w = root.at("workload");
    try
    {
        if (w.is_string())
        {
            std::filesystem::path p = w.get<std::string>();
            if (p.is_relative())
                p = base_dir / p;
            c.workload = npu::load_workload(p);
        }
        else
            c.workload = npu::parse_workload(w);
    }
    catch (const ConfigError& e)
    {
        throw ConfigError("workload." + e.field(), e.what());
    }
    catch (const ShapeError& e)
    {
        throw ConfigError("workload", e.what());
    }

    c.tech = root.has("tech_node") ? parse_tech(root.at("tech_node"), "tech_node") : reliability::tech_16nm();
    c.freq_ghz = positive(root, "freq_ghz", root.number("freq_ghz", 1.0));
    c.mac_config = root.text("mac_config", c.mac_config);
    if (root.has("logic_faults"))
        c.logic = parse_logic(root.child("logic_faults"));
    if (root.has("protection"))
        parse_protection(root.child("protection"), c);
    else
        c.schemes = protection::default_schemes();
    if (!root.has("areas"))
        throw ConfigError("areas", "missing");
    parse_areas(root.child("areas"), c);
    if (root.has("sampling"))
        c.sampling = parse_sampling(root.child("sampling"));
    if (root.has("asil"))
        c.asil = parse_asil_section(root.child("asil"));

    try
    {
        (void)npu::build_npu(c.npu);
    }
    catch (const ConfigError& e)
    {
        throw ConfigError(e.field(), e.what());
    }
    return c;
}

ProjectConfig load_project(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError(fmt::format("cannot read config '{}'", path.string()));
    nlohmann::json doc;
    try
    {
        doc = nlohmann::json::parse(in);
    }
    catch (const nlohmann::json::parse_error& e)
    {
        throw ConfigError("<root>", fmt::format("{}: {}", path.string(), e.what()));
    }
    auto c = parse_project(doc, path.parent_path());
    c.path = path;
    return c;
}

void select_node(ProjectConfig& config, const std::string& name)
{
    const auto node = reliability::find_tech_node(name);
    if (!node)
        throw ConfigError("--node", fmt::format("unknown technology preset '{}'", name));
    config.tech = *node;
}

double resolve_delta(const ProjectConfig& config)
{
    if (config.delta_pct)
        return *config.delta_pct;
    const auto d = protection::checker_overhead_pct(config.tech.name, config.mac_config);
    if (!d)
        throw ConfigError("protection.delta_pct",
                          fmt::format("no checker overhead tabulated for {} at {}; set it explicitly", config.mac_config,
                                      config.tech.name));
    return *d;
}

reliability::AsilTarget resolve_target(const ProjectConfig& config, reliability::AsilLevel level)
{
    const auto row = [&]() -> std::optional<reliability::PublishedAsilRow> {
        for (const auto& r : reliability::published_asil_d())
            if (r.mac_config == config.mac_config)
                return r;
        return std::nullopt;
    }();
    if (config.asil.source == AsilSource::Published)
    {
        if (!row)
            throw ConfigError("mac_config", fmt::format("no published ASIL threshold for '{}'", config.mac_config));
        return reliability::published_asil_target(config.mac_config, level);
    }
    const double fraction = config.asil.area_fraction ? *config.asil.area_fraction
                            : row                     ? row->area_fraction
                                                      : throw ConfigError("asil.area_fraction", "missing");
    return reliability::asil_threshold(level, fraction,
                                       config.asil.inference_time_s.value_or(reliability::kPublishedInferenceTime));
}

protection::FitTerms block_fit(const ProjectConfig& config, BlockId block)
{
    protection::FitTerms t;
    t.fit = config.tech.ff_fit_per_mb;
    if (config.logic.source == AlphaSource::Flux)
        t.alpha = reliability::alpha_from_ser(reliability::ser_comb_flux(config.tech.flux, config.tech.cross_section_cm2));
    else
    {
        auto params = config.logic.params;
        if (const auto it = config.logic.fanin.find(block); it != config.logic.fanin.end())
            params.fanin = it->second;
        const double ratio = reliability::ser_comb_ratio(params, config.tech.fom_pct);
        t.alpha = reliability::alpha_from_latch_ratio(ratio, params.latch_factor, t.fit);
    }
    return t;
}

double block_probability(const ProjectConfig& config, BlockId block, bool logic_faults)
{
    const auto t = block_fit(config, block);
    const double fit = logic_faults ? reliability::adjusted_fit(t.fit, t.alpha) : t.fit;
    return reliability::fault_probability(fit, config.freq_ghz * 1e9);
}

} // namespace sdcnpu::project
