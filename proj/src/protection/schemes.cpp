#include "sdcnpu/protection/schemes.hpp"

#include "sdcnpu/error.hpp"

#include <array>

namespace sdcnpu::protection
{

namespace
{

struct DeltaRow
{
    std::string_view mac_config;
    double nm16, nm7;
};

constexpr std::array<DeltaRow, 4> kCheckerOverhead = {{
    {"MAC-32", 7.3, 5.1},
    {"MAC-64", 8.4, 6.6},
    {"MAC-128", 10.7, 7.4},
    {"MAC-256", 13.5, 10.1},
}};

double hardened_ratio(double table_value, HardeningReading reading)
{
    return reading == HardeningReading::Reduction ? 1.0 - table_value : table_value;
}

} // namespace

std::string_view scheme_name(SchemeKind k) noexcept
{
    switch (k)
    {
    case SchemeKind::None: return "none";
    case SchemeKind::QuatroHard: return "quatro";
    case SchemeKind::DMR: return "dmr";
    case SchemeKind::TspcDiceHard: return "tspc-dice";
    }
    return "?";
}

std::optional<SchemeKind> parse_scheme(std::string_view s) noexcept
{
    for (auto k : {SchemeKind::None, SchemeKind::QuatroHard, SchemeKind::DMR, SchemeKind::TspcDiceHard})
        if (scheme_name(k) == s)
            return k;
    return std::nullopt;
}

Scheme scheme_none() { return {SchemeKind::None, 0.0, 1.0, 1.0}; }

Scheme scheme_dmr() { return {SchemeKind::DMR, 100.0, 0.0, 0.0}; }

Scheme scheme_quatro(HardeningReading reading)
{
    return {SchemeKind::QuatroHard, 157.0, hardened_ratio(0.98, reading), 1.0};
}

Scheme scheme_tspc_dice(HardeningReading reading)
{
    return {SchemeKind::TspcDiceHard, 46.05, hardened_ratio(0.75, reading), 0.0};
}

std::vector<Scheme> default_schemes(HardeningReading reading)
{
    return {scheme_none(), scheme_quatro(reading), scheme_dmr(), scheme_tspc_dice(reading)};
}

std::optional<double> checker_overhead_pct(std::string_view node, std::string_view mac_config)
{
    for (const auto& row : kCheckerOverhead)
        if (row.mac_config == mac_config)
        {
            if (node == "16nm")
                return row.nm16;
            if (node == "7nm")
                return row.nm7;
        }
    return std::nullopt;
}

SchemeEffect apply_scheme(double sdc_sites, double p_block, const Scheme& scheme, bool logic_faults,
                          const FitTerms& fit)
{
    switch (scheme.kind)
    {
    case SchemeKind::None:
        return {p_block, p_block * sdc_sites};
    case SchemeKind::DMR:
        return {p_block, 0.0};
    case SchemeKind::QuatroHard:
    case SchemeKind::TspcDiceHard:
        break;
    }
    double p = 0.0;
    if (!logic_faults)
        p = scheme.fit_ratio * p_block;
    else if (const double denom = fit.fit + fit.alpha; denom > 0.0)
        p = (scheme.fit_ratio * fit.fit + scheme.alpha_ratio * fit.alpha) / denom * p_block;
    return {p, p * sdc_sites};
}

SchemeEffect apply_scheme(const campaign::BlockStats& stats, double p_block, const Scheme& scheme, bool logic_faults,
                          const FitTerms& fit)
{
    if (stats.K == 0)
        throw InputError("block stats have no samples");
    const double sdc_sites = static_cast<double>(stats.N) / static_cast<double>(stats.K) * stats.sdc_sum;
    return apply_scheme(sdc_sites, p_block, scheme, logic_faults, fit);
}

double added_area(const BlockArea& area, const Scheme& scheme, double delta_pct)
{
    switch (scheme.kind)
    {
    case SchemeKind::None: return 0.0;
    case SchemeKind::DMR: return area.total_area * (scheme.area_overhead_pct + delta_pct) / 100.0;
    case SchemeKind::QuatroHard:
    case SchemeKind::TspcDiceHard: return area.total_area * area.ff_fraction * scheme.area_overhead_pct / 100.0;
    }
    return 0.0;
}

} // namespace sdcnpu::protection
