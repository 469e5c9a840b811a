#include "sdcnpu/reliability/model.hpp"

#include "sdcnpu/error.hpp"

#include <fmt/format.h>

#include <array>
#include <cmath>

namespace sdcnpu::reliability
{

namespace
{

constexpr double kBitsPerMb = 1048576.0 * 8.0;
constexpr double kHoursPerBillion = 1e9;
constexpr double kSecondsPerHour = 3600.0;

constexpr std::array<PublishedAsilRow, 4> kPublished = {{
    {"MAC-32", 0.12, 0.10e-15},
    {"MAC-64", 0.14, 0.12e-15},
    {"MAC-128", 0.17, 0.15e-15},
    {"MAC-256", 0.27, 0.23e-15},
}};

} // namespace

TechNode tech_16nm() { return {"16nm", 50.0, 0.75, 0.5, 3e-11, 0.9477, 0.001}; }

TechNode tech_7nm() { return {"7nm", 10.0, 0.7, 0.05, 0.306e-11, 0.8059, 0.001}; }

std::optional<TechNode> find_tech_node(std::string_view name)
{
    if (name == "16nm")
        return tech_16nm();
    if (name == "7nm")
        return tech_7nm();
    return std::nullopt;
}

void validate(const TechNode& n)
{
    const std::array<std::pair<const char*, double>, 6> fields = {{{"ff_fit_per_mb", n.ff_fit_per_mb},
                                                                    {"voltage", n.voltage},
                                                                    {"fom_pct", n.fom_pct},
                                                                    {"cross_section_cm2", n.cross_section_cm2},
                                                                    {"qcrit_fc", n.qcrit_fc},
                                                                    {"flux", n.flux}}};
    for (const auto& [name, v] : fields)
        if (!(v > 0.0) || !std::isfinite(v))
            throw DomainError(fmt::format("tech node {}: {} must be positive", n.name, name));
}

void validate(const LogicFaultParams& p)
{
    if (!(p.ld_comb > 0.0 && p.ld_comb <= 1.0))
        throw DomainError("ld_comb must lie in (0,1]");
    if (!(p.freq_ghz > 0.0))
        throw DomainError("freq_ghz must be positive");
    if (!(p.fanin >= 1.0))
        throw DomainError("fanin must be at least 1");
    if (!(p.depth_d > 0.0))
        throw DomainError("depth_d must be positive");
    if (!(p.latch_factor > 0.0))
        throw DomainError("latch_factor must be positive");
}

double fault_probability(double fit_per_mb, double freq_hz)
{
    if (!(freq_hz > 0.0))
        throw DomainError("frequency must be positive");
    if (!(fit_per_mb >= 0.0))
        throw DomainError("FIT must be non-negative");
    return fit_per_mb / (kBitsPerMb * kHoursPerBillion * kSecondsPerHour * freq_hz);
}

double fault_probability_per_second(double fit_per_mb) { return fault_probability(fit_per_mb, 1.0); }

double sdc_exact_multiflip(std::span<const double> p, std::span<const double> event_sdc)
{
    const std::size_t n = p.size();
    if (n > kMaxExactSites)
        throw CapacityError(fmt::format("exact multi-flip expansion is limited to {} sites (got {}); use "
                                        "sdc_simplified",
                                        kMaxExactSites, n));
    const std::size_t events = std::size_t{1} << n;
    if (event_sdc.size() != events)
        throw InputError(fmt::format("expected {} event SDC entries for {} sites, got {}", events, n, event_sdc.size()));
    for (double x : p)
        if (!(x >= 0.0 && x <= 1.0))
            throw DomainError("site probabilities must lie in [0,1]");

    double total = 0.0;
    for (std::size_t mask = 1; mask < events; ++mask)
    {
        double prob = 1.0;
        for (std::size_t i = 0; i < n; ++i)
            prob *= (mask >> i) & 1u ? p[i] : 1.0 - p[i];
        total += prob * event_sdc[mask];
    }
    return total;
}

double sdc_simplified(std::span<const SiteTerm> sites)
{
    double total = 0.0;
    for (const SiteTerm& s : sites)
        total += s.probability * s.sdc;
    return total;
}

SdcEstimate sdc_npu_estimate(std::span<const campaign::BlockStats> stats, const SitePopulation& pop)
{
    SdcEstimate est;
    for (BlockId b : kAllBlocks)
    {
        const std::size_t i = index_of(b);
        if (pop.sites[i] == 0)
            continue;
        const campaign::BlockStats* st = nullptr;
        for (const auto& s : stats)
            if (s.block == b)
                st = &s;
        if (!st)
            throw InputError(fmt::format("missing stats for block {}", block_name(b)));
        if (st->K == 0)
            throw InputError(fmt::format("block {} has no samples", block_name(b)));
        if (st->N != pop.sites[i])
            throw InputError(fmt::format("block {}: stats population {} differs from site population {}",
                                         block_name(b), st->N, pop.sites[i]));
        const double p = pop.probability[i];
        const double scale = static_cast<double>(st->N) / static_cast<double>(st->K);
        est.contribution[i] = p * (scale * st->sdc_sum);
        est.present[i] = true;
        est.sdc_npu += est.contribution[i];
        est.lower += p * static_cast<double>(st->N) * st->ci_low;
        est.upper += p * static_cast<double>(st->N) * st->ci_high;
    }
    return est;
}

double ser_comb_ratio(const LogicFaultParams& params, double fom_pct)
{
    if (!(params.fanin >= 1.0))
        throw DomainError("fanin must be at least 1");
    validate(params);
    const double fan = params.fanin == 1.0
                           ? params.depth_d
                           : (std::pow(params.fanin, params.depth_d + 1.0) - 1.0) / (params.fanin - 1.0);
    return params.ld_comb * params.freq_ghz * fom_pct * fan;
}

double ser_comb_flux(double flux, double cross_section_cm2)
{
    if (!(flux >= 0.0) || !(cross_section_cm2 >= 0.0))
        throw DomainError("flux and cross section must be non-negative");
    return flux * cross_section_cm2;
}

double alpha_from_ser(double ser_comb_per_hr)
{
    if (!(ser_comb_per_hr >= 0.0))
        throw DomainError("SER must be non-negative");
    return ser_comb_per_hr * kHoursPerBillion;
}

double alpha_from_cumulative(double errors, double hours)
{
    if (!(hours > 0.0) || !(errors >= 0.0))
        throw DomainError("cumulative SER needs errors >= 0 and hours > 0");
    return errors * kHoursPerBillion / hours;
}

double alpha_from_latch_ratio(double ratio_pct, double latch_factor, double fit_per_mb)
{
    if (!(ratio_pct >= 0.0) || !(latch_factor >= 0.0) || !(fit_per_mb >= 0.0))
        throw DomainError("latch-relative SER inputs must be non-negative");
    return ratio_pct / 100.0 * latch_factor * fit_per_mb;
}

double adjusted_fit(double fit, double alpha)
{
    if (!(fit >= 0.0) || !(alpha >= 0.0))
        throw DomainError("FIT and alpha must be non-negative");
    return fit + alpha;
}

std::optional<AsilLevel> parse_asil(std::string_view s)
{
    if (s == "B" || s == "b" || s == "asil-b")
        return AsilLevel::B;
    if (s == "C" || s == "c" || s == "asil-c")
        return AsilLevel::C;
    if (s == "D" || s == "d" || s == "asil-d")
        return AsilLevel::D;
    return std::nullopt;
}

std::string_view asil_name(AsilLevel level)
{
    switch (level)
    {
    case AsilLevel::B: return "ASIL-B";
    case AsilLevel::C: return "ASIL-C";
    case AsilLevel::D: return "ASIL-D";
    }
    return "?";
}

double soc_fit_budget(AsilLevel level)
{
    switch (level)
    {
    case AsilLevel::B:
    case AsilLevel::C: return 100.0;
    case AsilLevel::D: return 10.0;
    }
    throw DomainError("unknown ASIL level");
}

AsilTarget asil_threshold(AsilLevel level, double area_fraction, double inference_time_s)
{
    if (!(area_fraction > 0.0 && area_fraction <= 1.0))
        throw DomainError("area fraction must lie in (0,1]");
    if (!(inference_time_s > 0.0))
        throw DomainError("inference time must be positive");
    AsilTarget t;
    t.level = level;
    t.soc_fit_budget = soc_fit_budget(level);
    t.area_fraction = area_fraction;
    t.inference_time_s = inference_time_s;
    t.threshold_per_inference =
        t.soc_fit_budget * area_fraction * inference_time_s / (kHoursPerBillion * kSecondsPerHour);
    return t;
}

std::span<const PublishedAsilRow> published_asil_d() { return kPublished; }

AsilTarget published_asil_target(std::string_view mac_config, AsilLevel level)
{
    for (const auto& row : kPublished)
        if (row.mac_config == mac_config)
        {
            AsilTarget t = asil_threshold(level, row.area_fraction, kPublishedInferenceTime);
            t.threshold_per_inference =
                row.threshold_per_inference * (soc_fit_budget(level) / soc_fit_budget(AsilLevel::D));
            return t;
        }
    throw DomainError(fmt::format("no published ASIL threshold for MAC configuration '{}'", mac_config));
}

bool meets_asil(double sdc_npu, const AsilTarget& target) { return sdc_npu < target.threshold_per_inference; }

} // namespace sdcnpu::reliability
