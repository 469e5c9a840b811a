#pragma once

#include "sdcnpu/npu/simulator.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace sdcnpu::campaign
{

struct CampaignRecord
{
    std::uint64_t run_id = 0;
    npu::FaultSite site;
    npu::InjectionOutcome outcome;
};

/// Record log layout: one header line, then one line per injection in run_id
/// order with the fields
///   run_id,block,register,bit,cycle,kind,sdc_fraction,crash_reason
/// (`-` when there is no crash reason). sdc_fraction is written in shortest
/// round-trip form, so replaying a log reproduces the statistics exactly.
struct LogHeader
{
    std::uint64_t plan_fingerprint = 0;
    std::uint64_t total_runs = 0;
};

std::string format_header(const LogHeader& h);
std::string format_record(const CampaignRecord& r);

/// Parses one record line (no trailing newline); nullopt if malformed.
std::optional<CampaignRecord> parse_record(const std::string& line);

struct LogContents
{
    LogHeader header;
    std::vector<CampaignRecord> records;
    /// Byte length of the header plus all complete, valid records.
    std::uint64_t valid_bytes = 0;
    /// A final line without newline (interrupted write) was dropped.
    bool torn_tail = false;
};

/// Reads a record log. A final unterminated line is treated as an interrupted
/// write and dropped; any other malformed or out-of-sequence line throws
/// CorruptLogError carrying the last valid run_id.
LogContents read_log(const std::filesystem::path& path);

/// Shortest decimal text that parses back to exactly `x`.
std::string format_double(double x);

} // namespace sdcnpu::campaign
