#include "sdcnpu/campaign/records.hpp"

#include "sdcnpu/error.hpp"

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <sstream>

namespace sdcnpu::campaign
{

namespace
{

constexpr std::string_view kMagic = "# sdcnpu-records v1";

std::vector<std::string_view> split(std::string_view s, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;)
    {
        const std::size_t pos = s.find(sep, start);
        out.push_back(s.substr(start, pos - start));
        if (pos == std::string_view::npos)
            return out;
        start = pos + 1;
    }
}

template <typename T>
bool parse_number(std::string_view s, T& out, int base = 10)
{
    if (s.empty())
        return false;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out, base);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

bool parse_double(std::string_view s, double& out)
{
    if (s.empty())
        return false;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

std::optional<LogHeader> parse_header(std::string_view line)
{
    // "# sdcnpu-records v1 plan=<hex> runs=<n>"
    if (line.substr(0, kMagic.size()) != kMagic)
        return std::nullopt;
    LogHeader h;
    bool plan = false, runs = false;
    for (std::string_view tok : split(line.substr(kMagic.size()), ' '))
    {
        if (tok.starts_with("plan="))
            plan = parse_number(tok.substr(5), h.plan_fingerprint, 16);
        else if (tok.starts_with("runs="))
            runs = parse_number(tok.substr(5), h.total_runs);
    }
    if (!plan || !runs)
        return std::nullopt;
    return h;
}

} // namespace

std::string format_double(double x)
{
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, ptr);
}

std::string format_header(const LogHeader& h)
{
    return fmt::format("{} plan={:016x} runs={}", kMagic, h.plan_fingerprint, h.total_runs);
}

std::string format_record(const CampaignRecord& r)
{
    const auto& o = r.outcome;
    return fmt::format("{},{},{},{},{},{},{},{}", r.run_id, block_name(r.site.block), r.site.reg, r.site.bit,
                       r.site.cycle, npu::outcome_name(o.kind), format_double(o.sdc_fraction),
                       o.crash_reason ? npu::crash_reason_name(*o.crash_reason) : std::string_view("-"));
}

std::optional<CampaignRecord> parse_record(const std::string& line)
{
    const auto f = split(line, ',');
    if (f.size() != 8)
        return std::nullopt;
    CampaignRecord r;
    const auto block = parse_block(f[1]);
    const auto kind = npu::parse_outcome(f[5]);
    if (!parse_number(f[0], r.run_id) || !block || f[2].empty() || !parse_number(f[3], r.site.bit) ||
        !parse_number(f[4], r.site.cycle) || !kind || !parse_double(f[6], r.outcome.sdc_fraction))
        return std::nullopt;
    r.site.block = *block;
    r.site.reg = std::string(f[2]);
    r.outcome.kind = *kind;
    if (f[7] != "-")
    {
        r.outcome.crash_reason = npu::parse_crash_reason(f[7]);
        if (!r.outcome.crash_reason)
            return std::nullopt;
    }
    const double frac = r.outcome.sdc_fraction;
    const bool consistent = (*kind == npu::OutcomeKind::SDC) ? (frac > 0.0 && frac <= 1.0) : frac == 0.0;
    if (!consistent || (*kind == npu::OutcomeKind::Crash) != r.outcome.crash_reason.has_value())
        return std::nullopt;
    return r;
}

LogContents read_log(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open record log " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();

    LogContents out;
    std::size_t pos = 0;
    bool have_header = false;
    std::int64_t last_valid = -1;
    while (pos < text.size())
    {
        const std::size_t nl = text.find('\n', pos);
        if (nl == std::string::npos)
        {
            out.torn_tail = true;
            break;
        }
        const std::string line = text.substr(pos, nl - pos);
        if (!have_header)
        {
            auto h = parse_header(line);
            if (!h)
                throw CorruptLogError("record log " + path.string() + " has no valid header", -1);
            out.header = *h;
            have_header = true;
        }
        else
        {
            auto rec = parse_record(line);
            if (!rec || rec->run_id != static_cast<std::uint64_t>(last_valid + 1))
                throw CorruptLogError(fmt::format("corrupted record after run_id {} in {}", last_valid, path.string()),
                                      last_valid);
            last_valid = static_cast<std::int64_t>(rec->run_id);
            out.records.push_back(std::move(*rec));
        }
        pos = nl + 1;
        out.valid_bytes = pos;
    }
    if (!have_header && !out.torn_tail)
        throw CorruptLogError("record log " + path.string() + " is empty", -1);
    if (!have_header)
        throw CorruptLogError("record log " + path.string() + " has a truncated header", -1);
    return out;
}

} // namespace sdcnpu::campaign
