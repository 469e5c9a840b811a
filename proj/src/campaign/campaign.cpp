#include "sdcnpu/campaign/campaign.hpp"

#include "sdcnpu/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace sdcnpu::campaign
{

namespace
{

struct PlannedRun
{
    std::size_t space;
    std::uint64_t index;
};

std::vector<PlannedRun> planned_runs(const SamplingPlan& plan, const std::vector<BlockSpace>& spaces)
{
    const auto indices = draw_indices(plan, spaces);
    std::vector<PlannedRun> runs;
    for (std::size_t s = 0; s < spaces.size(); ++s)
        for (std::uint64_t idx : indices[s])
            runs.push_back({s, idx});
    return runs;
}

std::uint64_t mix(std::uint64_t h, std::uint64_t v)
{
    for (int i = 0; i < 8; ++i)
        h = (h ^ ((v >> (8 * i)) & 0xFF)) * 0x100000001b3ull;
    return h;
}

std::uint64_t mix(std::uint64_t h, std::string_view s)
{
    for (unsigned char c : s)
        h = (h ^ c) * 0x100000001b3ull;
    return mix(h, s.size());
}

class LogWriter
{
  public:
    LogWriter(const std::filesystem::path& path, std::ios::openmode mode) : path_(path)
    {
        if (path.empty())
            return;
        out_.open(path, std::ios::binary | mode);
        if (!out_)
            throw IoError("cannot open record log " + path.string() + " for writing");
    }

    void line(const std::string& text)
    {
        if (!out_.is_open())
            return;
        out_ << text << '\n';
        out_.flush();
        if (!out_)
            throw IoError("write to record log " + path_.string() + " failed");
    }

  private:
    std::filesystem::path path_;
    std::ofstream out_;
};

/// Runs `runs[begin, end)` on `jobs` threads and hands finished records to
/// `writer` strictly in run_id order.
std::vector<CampaignRecord> execute(const npu::NpuModel& model, const npu::Workload& workload,
                                    const npu::GoldenResult& golden, const std::vector<BlockSpace>& spaces,
                                    const std::vector<PlannedRun>& runs, std::uint64_t begin, std::uint64_t end,
                                    const CampaignOptions& options, LogWriter& writer)
{
    const std::uint64_t count = end - begin;
    std::vector<std::optional<CampaignRecord>> slots(count);
    std::vector<CampaignRecord> done;
    done.reserve(count);

    std::mutex mu;
    std::condition_variable ready;
    std::uint64_t next_claim = 0;
    bool stop = false;
    std::exception_ptr failure;

    auto stopped = [&] { return stop || (options.stop && options.stop->load()); };

    auto worker = [&] {
        for (;;)
        {
            std::uint64_t i;
            {
                std::lock_guard lock(mu);
                if (stopped() || next_claim >= count)
                    return;
                i = next_claim++;
            }
            CampaignRecord rec;
            rec.run_id = begin + i;
            try
            {
                const PlannedRun& pr = runs[rec.run_id];
                rec.site = spaces[pr.space].site(pr.index);
                rec.outcome = npu::run_injected(model, workload, rec.site, golden);
            }
            catch (...)
            {
                std::lock_guard lock(mu);
                if (!failure)
                    failure = std::current_exception();
                stop = true;
                ready.notify_all();
                return;
            }
            std::lock_guard lock(mu);
            slots[i] = std::move(rec);
            ready.notify_all();
        }
    };

    const unsigned jobs = std::max(1u, options.jobs);
    std::vector<std::jthread> pool;
    for (unsigned j = 0; j < jobs; ++j)
        pool.emplace_back(worker);

    // The calling thread serializes completed records in run_id order. Claimed
    // runs always complete, so after a stop only unclaimed ids are abandoned.
    try
    {
        for (std::uint64_t i = 0; i < count; ++i)
        {
            std::unique_lock lock(mu);
            while (!slots[i] && !failure && !(stopped() && i >= next_claim))
                ready.wait_for(lock, std::chrono::milliseconds(20));
            if (!slots[i])
                break;
            CampaignRecord rec = std::move(*slots[i]);
            slots[i].reset();
            lock.unlock();
            writer.line(format_record(rec));
            done.push_back(std::move(rec));
        }
    }
    catch (...)
    {
        {
            std::lock_guard lock(mu);
            stop = true;
        }
        pool.clear();
        throw;
    }
    pool.clear();
    if (failure)
        std::rethrow_exception(failure);
    return done;
}

CampaignResult finish(std::vector<CampaignRecord> records, std::uint64_t total, const std::vector<BlockSpace>& spaces,
                      const SamplingPlan& plan)
{
    CampaignResult result;
    result.complete = records.size() == total;
    if (result.complete)
        result.stats = compute_stats(records, spaces, plan.confidence);
    result.records = std::move(records);
    return result;
}

std::uint64_t run_limit(std::uint64_t done, std::uint64_t total, const CampaignOptions& options)
{
    if (!options.max_new_runs)
        return total;
    return std::min(total, done + *options.max_new_runs);
}

} // namespace

Interval wilson_interval(double mean, std::uint64_t n, double z)
{
    if (n == 0)
        return {0.0, 1.0};
    const double nn = static_cast<double>(n);
    const double z2 = z * z;
    const double denom = 1.0 + z2 / nn;
    const double center = (mean + z2 / (2.0 * nn)) / denom;
    const double half = z / denom * std::sqrt(mean * (1.0 - mean) / nn + z2 / (4.0 * nn * nn));
    // The bounds are exactly 0 and 1 at the ends; the closed form only cancels to within rounding.
    return {mean <= 0.0 ? 0.0 : std::max(0.0, center - half), mean >= 1.0 ? 1.0 : std::min(1.0, center + half)};
}

std::vector<BlockStats> compute_stats(const std::vector<CampaignRecord>& records,
                                      const std::vector<BlockSpace>& spaces, double confidence)
{
    const double z = z_for_confidence(confidence);
    std::vector<BlockStats> stats;
    for (const BlockSpace& s : spaces)
    {
        BlockStats st;
        st.block = s.block();
        st.N = s.population();
        stats.push_back(st);
    }
    for (const CampaignRecord& r : records)
    {
        auto it = std::find_if(stats.begin(), stats.end(), [&](const BlockStats& s) { return s.block == r.site.block; });
        if (it == stats.end())
            throw InputError(fmt::format("record {} belongs to unplanned block {}", r.run_id, block_name(r.site.block)));
        ++it->K;
        it->sdc_sum += r.outcome.sdc_fraction;
        switch (r.outcome.kind)
        {
        case npu::OutcomeKind::Masked: ++it->masked; break;
        case npu::OutcomeKind::SDC: ++it->sdc; break;
        case npu::OutcomeKind::Crash: ++it->crash; break;
        }
    }
    for (BlockStats& st : stats)
    {
        if (st.K == 0)
            continue;
        const double k = static_cast<double>(st.K);
        st.sdc_mean = st.sdc_sum / k;
        st.crash_rate = static_cast<double>(st.crash) / k;
        const Interval ci = wilson_interval(st.sdc_mean, st.K, z);
        st.ci_low = ci.low;
        st.ci_high = ci.high;
        st.ci_halfwidth = (ci.high - ci.low) / 2.0;
    }
    return stats;
}

std::uint64_t plan_fingerprint(const npu::GoldenResult& golden, const SamplingPlan& plan)
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    h = mix(h, golden.state_digest);
    h = mix(h, golden.cycle_count);
    h = mix(h, plan.seed);
    h = mix(h, std::bit_cast<std::uint64_t>(plan.confidence));
    h = mix(h, std::bit_cast<std::uint64_t>(plan.margin));
    for (const auto& [block, k] : plan.per_block)
    {
        h = mix(h, index_of(block));
        h = mix(h, k);
        if (auto it = plan.registers.find(block); it != plan.registers.end())
            for (const auto& name : it->second)
                h = mix(h, name);
    }
    return h;
}

CampaignResult run_campaign(const npu::NpuModel& model, const npu::Workload& workload,
                            const npu::GoldenResult& golden, const SamplingPlan& plan, const CampaignOptions& options)
{
    const auto spaces = plan_spaces(model, golden, plan);
    validate_plan(plan, spaces);
    const auto runs = planned_runs(plan, spaces);

    LogWriter writer(options.log_path, std::ios::trunc);
    writer.line(format_header({plan_fingerprint(golden, plan), runs.size()}));
    auto records = execute(model, workload, golden, spaces, runs, 0, run_limit(0, runs.size(), options), options, writer);
    return finish(std::move(records), runs.size(), spaces, plan);
}

CampaignResult resume_campaign(const npu::NpuModel& model, const npu::Workload& workload,
                               const npu::GoldenResult& golden, const SamplingPlan& plan,
                               const CampaignOptions& options)
{
    if (options.log_path.empty())
        throw IoError("resume needs a record log path");
    std::error_code ec;
    const bool fresh = !std::filesystem::exists(options.log_path, ec) || std::filesystem::file_size(options.log_path, ec) == 0;
    if (fresh)
        return run_campaign(model, workload, golden, plan, options);

    const auto spaces = plan_spaces(model, golden, plan);
    validate_plan(plan, spaces);
    const auto runs = planned_runs(plan, spaces);

    LogContents log = read_log(options.log_path);
    if (log.header.plan_fingerprint != plan_fingerprint(golden, plan) || log.header.total_runs != runs.size())
        throw PlanError("record log " + options.log_path.string() + " was written for a different plan or workload");
    for (const CampaignRecord& r : log.records)
    {
        if (r.run_id >= runs.size() || !(spaces[runs[r.run_id].space].site(runs[r.run_id].index) == r.site))
            throw CorruptLogError(fmt::format("record {} does not match the plan", r.run_id),
                                  static_cast<std::int64_t>(r.run_id) - 1);
    }
    if (log.torn_tail)
        std::filesystem::resize_file(options.log_path, log.valid_bytes);

    const std::uint64_t done = log.records.size();
    LogWriter writer(options.log_path, std::ios::app);
    auto more = execute(model, workload, golden, spaces, runs, done, run_limit(done, runs.size(), options), options, writer);
    auto records = std::move(log.records);
    std::move(more.begin(), more.end(), std::back_inserter(records));
    return finish(std::move(records), runs.size(), spaces, plan);
}

std::string format_stats_csv(const std::vector<BlockStats>& stats)
{
    std::string out = "block,K,N,sdc_sum,sdc_mean,ci_low,ci_high,ci_halfwidth,crash_rate,masked,sdc,crash\n";
    for (const auto& s : stats)
        out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", block_name(s.block), s.K, s.N,
                           format_double(s.sdc_sum), format_double(s.sdc_mean), format_double(s.ci_low),
                           format_double(s.ci_high), format_double(s.ci_halfwidth), format_double(s.crash_rate),
                           s.masked, s.sdc, s.crash);
    return out;
}

std::vector<BlockStats> parse_stats_csv(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("block,K,N,", 0) != 0)
        throw InputError("stats file: missing header");
    std::vector<BlockStats> out;
    std::size_t lineno = 1;
    while (std::getline(in, line))
    {
        ++lineno;
        if (line.empty())
            continue;
        std::vector<std::string> f;
        std::istringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');)
            f.push_back(cell);
        const auto bad = [&] { return InputError(fmt::format("stats file line {}: malformed row", lineno)); };
        if (f.size() != 12)
            throw bad();
        const auto block = parse_block(f[0]);
        if (!block)
            throw bad();
        BlockStats s;
        s.block = *block;
        try
        {
            std::size_t used = 0;
            const auto u64 = [&](const std::string& x) {
                if (x.empty() || x[0] == '-')
                    throw bad();
                const auto v = std::stoull(x, &used);
                if (used != x.size())
                    throw bad();
                return static_cast<std::uint64_t>(v);
            };
            const auto dbl = [&](const std::string& x) {
                const double v = std::stod(x, &used);
                if (used != x.size())
                    throw bad();
                return v;
            };
            s.K = u64(f[1]);
            s.N = u64(f[2]);
            s.sdc_sum = dbl(f[3]);
            s.sdc_mean = dbl(f[4]);
            s.ci_low = dbl(f[5]);
            s.ci_high = dbl(f[6]);
            s.ci_halfwidth = dbl(f[7]);
            s.crash_rate = dbl(f[8]);
            s.masked = u64(f[9]);
            s.sdc = u64(f[10]);
            s.crash = u64(f[11]);
        }
        catch (const std::logic_error&)
        {
            throw bad();
        }
        if (!out.empty() && index_of(out.back().block) >= index_of(s.block))
            throw InputError(fmt::format("stats file line {}: blocks out of order", lineno));
        out.push_back(s);
    }
    return out;
}

} // namespace sdcnpu::campaign
