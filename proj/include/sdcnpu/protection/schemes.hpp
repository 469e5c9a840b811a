#pragma once

#include "sdcnpu/blocks.hpp"
#include "sdcnpu/campaign/campaign.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sdcnpu::protection
{

/// Enumerator values are the report codes: 0 none, 1 flop hardening,
/// 2 DMR, 3 flop hardening with logic-fault (SET) elimination.
enum class SchemeKind : std::uint8_t
{
    None = 0,
    QuatroHard = 1,
    DMR = 2,
    TspcDiceHard = 3,
};

std::string_view scheme_name(SchemeKind k) noexcept;
std::optional<SchemeKind> parse_scheme(std::string_view s) noexcept;
constexpr int scheme_code(SchemeKind k) noexcept { return static_cast<int>(k); }

struct Scheme
{
    SchemeKind kind = SchemeKind::None;
    /// DMR: duplicate share of the whole block (checker delta added separately);
    /// hardening: share of the block's sequential area.
    double area_overhead_pct = 0.0;
    double fit_ratio = 1.0;   ///< FIT_hardened / FIT_unhardened
    double alpha_ratio = 1.0; ///< alpha' / alpha
};

/// How a hardened cell's FIT figure is read: as the residual share of the
/// unhardened FIT after a reduction of that size (0.98 -> 0.02), or as the
/// ratio itself.
enum class HardeningReading
{
    Reduction,
    Raw,
};

Scheme scheme_none();
Scheme scheme_dmr();
Scheme scheme_quatro(HardeningReading reading = HardeningReading::Reduction);
Scheme scheme_tspc_dice(HardeningReading reading = HardeningReading::Reduction);
/// The four schemes in code order.
std::vector<Scheme> default_schemes(HardeningReading reading = HardeningReading::Reduction);

/// DMR checker overhead (percent of the duplicated block) for a MAC
/// configuration ("MAC-32" .. "MAC-256") at "16nm" or "7nm".
std::optional<double> checker_overhead_pct(std::string_view node, std::string_view mac_config);

struct FitTerms
{
    double fit = 0.0;   ///< raw flop FIT/MB of the block
    double alpha = 0.0; ///< logic-fault FIT increase
};

struct SchemeEffect
{
    double probability;  ///< P'_block
    double contribution; ///< P'_block * (N/K) * sum of SDC_i, 0 under DMR
};

/// Effect of protecting one block with `scheme`, given the block's baseline
/// per-site probability `p_block` (logic-aware when `logic_faults`) and
/// `sdc_sites` = (N/K) * sum of sampled SDC_i.
SchemeEffect apply_scheme(double sdc_sites, double p_block, const Scheme& scheme, bool logic_faults,
                          const FitTerms& fit);
SchemeEffect apply_scheme(const campaign::BlockStats& stats, double p_block, const Scheme& scheme, bool logic_faults,
                          const FitTerms& fit);

struct BlockArea
{
    double total_area = 0.0;
    double ff_fraction = 1.0; ///< sequential share of the block area
};

/// Area added to a block of `area` by `scheme`.
double added_area(const BlockArea& area, const Scheme& scheme, double delta_pct);

} // namespace sdcnpu::protection
