#pragma once

#include "sdcnpu/blocks.hpp"
#include "sdcnpu/campaign/campaign.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sdcnpu::reliability
{

/// Technology parameters for one process node.
struct TechNode
{
    std::string name;
    double ff_fit_per_mb = 0.0;    ///< raw flop FIT per MB of flop bits
    double voltage = 0.0;          ///< V
    double fom_pct = 0.0;          ///< figure of merit, percent
    double cross_section_cm2 = 0.0;
    double qcrit_fc = 0.0;         ///< carried for completeness; no formula consumes it
    double flux = 0.0;             ///< particles / cm^2 / hr
};

TechNode tech_16nm();
TechNode tech_7nm();
/// "16nm" or "7nm"; nullopt otherwise.
std::optional<TechNode> find_tech_node(std::string_view name);
/// Throws DomainError unless every field is > 0.
void validate(const TechNode& node);

struct LogicFaultParams
{
    double ld_comb = 1.0;      ///< logic derating in (0,1]
    double freq_ghz = 1.0;
    double fanin = 1.0;        ///< average gate fan-in, >= 1
    double depth_d = 3.5;      ///< logic depth feeding one latch
    double latch_factor = 0.5; ///< SER_latch / SER_ff
};
void validate(const LogicFaultParams& params);

/// Probability of an upset in one flop bit during one clock cycle:
///   P = FIT/MB / (2^20 * 8 * 1e9 * 3600 * freq_hz).
double fault_probability(double fit_per_mb, double freq_hz);

/// Upset probability per bit per second (freq = 1 Hz in the formula above).
double fault_probability_per_second(double fit_per_mb);

/// Exact SDC over every flip/no-flip event of n independent sites. `event_sdc`
/// is indexed by the bitmask of flipped sites (bit i = site i) and has 2^n
/// entries; entry 0 (no flip) is ignored and treated as 0.
/// Throws CapacityError for n > 20, InputError for a mis-sized table.
inline constexpr std::size_t kMaxExactSites = 20;
double sdc_exact_multiflip(std::span<const double> probabilities, std::span<const double> event_sdc);

struct SiteTerm
{
    double probability;
    double sdc;
};

/// Single-flip approximation: sum of P_i * SDC_i.
double sdc_simplified(std::span<const SiteTerm> sites);

/// Per-block fault-site counts and per-site upset probabilities.
struct SitePopulation
{
    PerBlock<std::uint64_t> sites{};
    PerBlock<double> probability{};
};

struct SdcEstimate
{
    double sdc_npu = 0.0;
    double lower = 0.0; ///< sum of P * N * ci_low
    double upper = 0.0; ///< sum of P * N * ci_high
    PerBlock<double> contribution{};
    PerBlock<bool> present{};
};

/// Block-decomposed Monte Carlo estimate
///   SDC_NPU = sum over blocks of P_block * (N_block / K_block) * sum of SDC_i.
/// Every block with a nonzero population must have stats with K >= 1 and the
/// same N; otherwise InputError.
SdcEstimate sdc_npu_estimate(std::span<const campaign::BlockStats> stats, const SitePopulation& pop);

/// SER_comb as a percentage of nominal latch SER (fan-in upper bound).
/// Fanin = 1 uses the depth branch, Fanin > 1 the geometric-series branch.
double ser_comb_ratio(const LogicFaultParams& params, double fom_pct);

/// SER_comb = flux * sensitive cross section, in errors per hour.
double ser_comb_flux(double flux, double cross_section_cm2);

/// FIT increase from a logic SER rate: errors/hr * 1e9.
double alpha_from_ser(double ser_comb_per_hr);

/// FIT increase from a cumulative error count observed over `hours`.
double alpha_from_cumulative(double errors, double hours);

/// FIT/MB increase from the fan-in bound: SER_comb = ratio% * latch_factor * SER_ff.
double alpha_from_latch_ratio(double ratio_pct, double latch_factor, double fit_per_mb);

/// FIT' = FIT + alpha. Throws DomainError for negative inputs.
double adjusted_fit(double fit, double alpha);

enum class AsilLevel
{
    B,
    C,
    D,
};

std::optional<AsilLevel> parse_asil(std::string_view s);
std::string_view asil_name(AsilLevel level);

/// SoC-level FIT budget: 10 for ASIL-D, 100 for ASIL-B/C.
double soc_fit_budget(AsilLevel level);

struct AsilTarget
{
    AsilLevel level = AsilLevel::D;
    double soc_fit_budget = 0.0;
    double area_fraction = 0.0;
    double inference_time_s = 0.0;
    double threshold_per_inference = 0.0;
};

/// Derived target: (soc budget * area fraction) FIT spread over one inference,
/// threshold = budget * area_fraction * inference_time_s / (1e9 * 3600).
AsilTarget asil_threshold(AsilLevel level, double area_fraction, double inference_time_s);

/// Published per-inference ASIL-D thresholds by MAC configuration.
struct PublishedAsilRow
{
    std::string_view mac_config;
    double area_fraction;
    double threshold_per_inference;
};
inline constexpr double kPublishedInferenceTime = 0.3e-3;
std::span<const PublishedAsilRow> published_asil_d();

/// Published target for `mac_config` ("MAC-32" .. "MAC-256"). ASIL-B/C scale
/// the ASIL-D constant by the ratio of SoC budgets (100 / 10).
AsilTarget published_asil_target(std::string_view mac_config, AsilLevel level);

/// Strict: sdc_npu < threshold.
bool meets_asil(double sdc_npu, const AsilTarget& target);

} // namespace sdcnpu::reliability
