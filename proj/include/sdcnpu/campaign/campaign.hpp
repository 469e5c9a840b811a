#pragma once

#include "sdcnpu/campaign/records.hpp"
#include "sdcnpu/campaign/sampling.hpp"

#include <atomic>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sdcnpu::campaign
{

struct BlockStats
{
    BlockId block = BlockId::AO;
    std::uint64_t K = 0; ///< samples drawn
    std::uint64_t N = 0; ///< fault-site population
    double sdc_sum = 0.0;
    double sdc_mean = 0.0; ///< (1/K) * sum of per-injection sdc_fraction
    double ci_low = 0.0;
    double ci_high = 0.0;
    double ci_halfwidth = 0.0;
    double crash_rate = 0.0;
    std::uint64_t masked = 0, sdc = 0, crash = 0;
};

/// Wilson score interval for a mean of values in [0,1] from n samples.
struct Interval
{
    double low, high;
};
Interval wilson_interval(double mean, std::uint64_t n, double z);

/// Per-block statistics of a complete record stream, in canonical block order.
/// Records are folded in run_id order.
std::vector<BlockStats> compute_stats(const std::vector<CampaignRecord>& records,
                                      const std::vector<BlockSpace>& spaces, double confidence);

struct CampaignOptions
{
    unsigned jobs = 1;
    /// Record log to write; empty keeps records in memory only.
    std::filesystem::path log_path;
    /// Stop after this many new records (the rest stays for resume).
    std::optional<std::uint64_t> max_new_runs;
    /// Polled between runs; when set, the campaign stops at the next run boundary.
    const std::atomic<bool>* stop = nullptr;
};

struct CampaignResult
{
    std::vector<CampaignRecord> records;
    std::vector<BlockStats> stats; ///< empty unless complete
    bool complete = false;
};

/// Fingerprint binding a record log to (golden run, plan).
std::uint64_t plan_fingerprint(const npu::GoldenResult& golden, const SamplingPlan& plan);

/// Executes every sampled site via run_injected and returns records in run_id
/// order plus per-block statistics. Results are independent of `jobs`.
/// Throws PlanError before any run for an invalid plan, IoError if the log
/// cannot be written (the log then holds a replayable prefix).
CampaignResult run_campaign(const npu::NpuModel& model, const npu::Workload& workload,
                            const npu::GoldenResult& golden, const SamplingPlan& plan,
                            const CampaignOptions& options = {});

/// Continues the campaign recorded at options.log_path: replays its valid
/// prefix and executes exactly the missing runs. A missing or empty log starts
/// from scratch. Throws CorruptLogError for a damaged log and PlanError when
/// the log belongs to a different plan.
CampaignResult resume_campaign(const npu::NpuModel& model, const npu::Workload& workload,
                               const npu::GoldenResult& golden, const SamplingPlan& plan,
                               const CampaignOptions& options);

/// Stats file: header `block,K,N,sdc_sum,sdc_mean,ci_low,ci_high,ci_halfwidth,crash_rate,masked,sdc,crash`
/// then one row per block in canonical order, doubles in shortest round-trip form.
std::string format_stats_csv(const std::vector<BlockStats>& stats);

/// Inverse of format_stats_csv. Throws InputError naming the bad line.
std::vector<BlockStats> parse_stats_csv(const std::string& text);

} // namespace sdcnpu::campaign
