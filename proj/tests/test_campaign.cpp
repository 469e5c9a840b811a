#include "fixtures.hpp"

#include "sdcnpu/campaign/campaign.hpp"
#include "sdcnpu/campaign/records.hpp"
#include "sdcnpu/campaign/sampling.hpp"
#include "sdcnpu/error.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

using namespace sdcnpu;
using namespace sdcnpu::campaign;

namespace
{

struct Toy
{
    npu::NpuModel model;
    npu::Workload workload;
    npu::GoldenResult golden;
};

Toy toy()
{
    npu::NpuConfig c;
    c.buffer_bytes = 512;
    auto m = npu::build_npu(c);
    auto wl = sdcnpu::testing::toy_dense();
    auto g = npu::run_golden(m, wl);
    return {std::move(m), std::move(wl), std::move(g)};
}

SamplingPlan exhaustive_plan(const Toy& t)
{
    SamplingPlan plan;
    for (BlockId b : kAllBlocks)
        plan.per_block[b] = t.model.block_bits(b) * t.golden.cycle_count;
    return plan;
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

} // namespace

TEST(SampleSize, InfinitePopulation)
{
    EXPECT_NEAR(z_for_confidence(0.99), 2.5758293035489, 1e-9);
    const auto n = sample_size(std::numeric_limits<double>::infinity(), 0.01, 0.99, 0.5);
    EXPECT_NEAR(static_cast<double>(n), 16590.0, 5.0);
    // Independent evaluation of z^2 p (1-p) / e^2 with the same z.
    const double z = 2.5758293035489;
    EXPECT_EQ(n, static_cast<std::uint64_t>(std::ceil(z * z * 0.25 / 1e-4)));
}

TEST(SampleSize, FinitePopulationCapAndMonotonicity)
{
    const auto n = sample_size(100, 0.5, 0.99, 0.5);
    EXPECT_GE(n, 1u);
    EXPECT_LE(n, 100u);
    EXPECT_EQ(sample_size(10, 0.001, 0.99, 0.5), 10u);
    std::uint64_t prev = 0;
    for (double e : {0.2, 0.1, 0.05, 0.02, 0.01, 0.005})
    {
        const auto k = sample_size(50000, e, 0.99, 0.5);
        EXPECT_GE(k, prev);
        prev = k;
    }
}

TEST(SampleSize, DomainErrors)
{
    EXPECT_THROW(sample_size(100, 0.0, 0.99), DomainError);
    EXPECT_THROW(sample_size(100, 0.01, 1.0), DomainError);
    EXPECT_THROW(sample_size(100, 0.01, 0.99, 1.0), DomainError);
    EXPECT_THROW(sample_size(0, 0.01, 0.99), DomainError);
}

TEST(BlockSpace, IndexLayout)
{
    const auto t = toy();
    const BlockSpace s(t.model, BlockId::TSU, t.golden.cycle_count);
    EXPECT_EQ(s.bits(), 56u);
    EXPECT_EQ(s.population(), 56u * t.golden.cycle_count);
    const auto first = s.site(0);
    EXPECT_EQ(first.reg, "row_cnt");
    EXPECT_EQ(first.bit, 0u);
    EXPECT_EQ(first.cycle, 0u);
    const auto x = s.site(56 * 3 + 20);
    EXPECT_EQ(x.reg, "col_cnt");
    EXPECT_EQ(x.bit, 4u);
    EXPECT_EQ(x.cycle, 3u);
    EXPECT_EQ(s.site(56 * 5 + 55).reg, "fsm_state");
}

TEST(Sampling, DeterministicDistinctSorted)
{
    const auto t = toy();
    SamplingPlan plan;
    plan.seed = 77;
    plan.per_block = {{BlockId::MAC, 500}, {BlockId::WD, 50}};
    const auto spaces = plan_spaces(t.model, t.golden, plan);
    const auto a = draw_indices(plan, spaces), b = draw_indices(plan, spaces);
    EXPECT_EQ(a, b);
    ASSERT_EQ(a.size(), 2u);
    EXPECT_EQ(a[0].size(), 500u);
    EXPECT_EQ(a[1].size(), 50u);
    for (const auto& v : a)
    {
        EXPECT_TRUE(std::is_sorted(v.begin(), v.end()));
        EXPECT_EQ(std::set<std::uint64_t>(v.begin(), v.end()).size(), v.size());
    }
    plan.seed = 78;
    EXPECT_NE(draw_indices(plan, spaces), a);
}

TEST(Sampling, FullCountEnumeratesBlock)
{
    const auto t = toy();
    SamplingPlan plan;
    const std::uint64_t n = t.model.block_bits(BlockId::AO) * t.golden.cycle_count;
    plan.per_block = {{BlockId::AO, n}};
    const auto spaces = plan_spaces(t.model, t.golden, plan);
    const auto idx = draw_indices(plan, spaces);
    ASSERT_EQ(idx[0].size(), n);
    for (std::uint64_t i = 0; i < n; ++i)
        EXPECT_EQ(idx[0][i], i);
}

TEST(Sampling, StratificationNoLeakage)
{
    const auto t = toy();
    SamplingPlan plan;
    plan.seed = 3;
    plan.per_block = {{BlockId::AO, 10}, {BlockId::REG, 20}, {BlockId::TSU, 30}};
    const auto spaces = plan_spaces(t.model, t.golden, plan);
    const auto sites = draw_samples(plan, spaces);
    ASSERT_EQ(sites.size(), 60u);
    std::map<BlockId, int> per;
    for (const auto& s : sites)
        ++per[s.block];
    EXPECT_EQ(per[BlockId::AO], 10);
    EXPECT_EQ(per[BlockId::REG], 20);
    EXPECT_EQ(per[BlockId::TSU], 30);
}

TEST(Sampling, PerRegisterUniformityChiSquare)
{
    // Ten equal-width registers: MAC accumulators narrowed to 8 bits, two latches excluded.
    npu::NpuConfig c;
    c.buffer_bytes = 512;
    c.register_widths["MAC.acc"] = 8;
    const auto m = npu::build_npu(c);
    const auto wl = sdcnpu::testing::toy_dense();
    const auto g = npu::run_golden(m, wl);
    std::vector<std::string> regs;
    for (std::size_t i : m.block_registers(BlockId::MAC))
        regs.push_back(m.registers()[i].name);
    regs.resize(10);

    std::map<std::string, double> hits;
    std::uint64_t draws = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed)
    {
        SamplingPlan plan;
        plan.seed = seed;
        plan.per_block = {{BlockId::MAC, 1000}};
        plan.registers = {{BlockId::MAC, regs}};
        for (const auto& s : draw_samples(plan, plan_spaces(m, g, plan)))
        {
            hits[s.reg] += 1;
            ++draws;
        }
    }
    ASSERT_EQ(draws, 100000u);
    ASSERT_EQ(hits.size(), 10u);
    const double expected = static_cast<double>(draws) / 10.0;
    double chi2 = 0.0;
    for (const auto& [r, h] : hits)
        chi2 += (h - expected) * (h - expected) / expected;
    EXPECT_LT(chi2, 21.666); // chi-square, 9 degrees of freedom, 1% level
}

TEST(Plan, Validation)
{
    const auto t = toy();
    SamplingPlan plan;
    plan.per_block = {{BlockId::AO, 0}};
    EXPECT_THROW(validate_plan(plan, plan_spaces(t.model, t.golden, plan)), PlanError);
    plan.per_block = {{BlockId::AO, 1'000'000}};
    EXPECT_THROW(validate_plan(plan, plan_spaces(t.model, t.golden, plan)), PlanError);
    plan.per_block = {{BlockId::AO, 1}};
    plan.margin = 1.5;
    EXPECT_THROW(validate_plan(plan, plan_spaces(t.model, t.golden, plan)), PlanError);
    plan = {};
    plan.per_block = {{BlockId::AO, 1}};
    plan.registers = {{BlockId::AO, {"bogus"}}};
    EXPECT_THROW(plan_spaces(t.model, t.golden, plan), PlanError);
}

TEST(Plan, ZeroSampleRejectedBeforeAnyRun)
{
    const auto t = toy();
    const auto dir = sdcnpu::testing::scratch_dir("plan_reject");
    SamplingPlan plan;
    plan.per_block = {{BlockId::AO, 0}};
    CampaignOptions o;
    o.log_path = dir / "records.log";
    EXPECT_THROW(run_campaign(t.model, t.workload, t.golden, plan, o), PlanError);
    EXPECT_FALSE(std::filesystem::exists(o.log_path));
}

TEST(Allocation, ProportionalSumsAndBounds)
{
    const PerBlock<std::uint64_t> pops{1000, 2000, 0, 7000, 3, 40};
    const auto a = allocate_proportional(pops, 500);
    std::uint64_t sum = 0;
    for (const auto& [b, k] : a)
    {
        EXPECT_GE(k, 1u);
        EXPECT_LE(k, pops[index_of(b)]);
        sum += k;
    }
    EXPECT_FALSE(a.count(BlockId::MAC));
    EXPECT_NEAR(static_cast<double>(sum), 500.0, 2.0);
    EXPECT_EQ(a.at(BlockId::REG), 348u); // 500 * 7000 / 10043 = 348.5, remainder loses to WD, AO, DMA
    const auto f = allocate_fraction(pops, 0.1);
    EXPECT_EQ(f.at(BlockId::AO), 100u);
    EXPECT_EQ(f.at(BlockId::TSU), 1u);
    EXPECT_THROW(allocate_fraction(pops, 0.0), DomainError);
}

TEST(Records, RoundTrip)
{
    CampaignRecord r;
    r.run_id = 42;
    r.site = {BlockId::MAC, "acc[1][0]", 31, 1234};
    r.outcome.kind = npu::OutcomeKind::SDC;
    r.outcome.sdc_fraction = 0.1 + 0.2;
    const auto line = format_record(r);
    const auto back = parse_record(line.substr(0, line.size() - (line.back() == '\n')));
    ASSERT_TRUE(back);
    EXPECT_EQ(back->run_id, 42u);
    EXPECT_EQ(back->site, r.site);
    EXPECT_EQ(back->outcome.kind, npu::OutcomeKind::SDC);
    EXPECT_EQ(back->outcome.sdc_fraction, r.outcome.sdc_fraction);

    r.outcome = {npu::OutcomeKind::Crash, 0.0, npu::CrashReason::InvalidAccess, 0};
    const auto l2 = format_record(r);
    const auto b2 = parse_record(l2.substr(0, l2.size() - (l2.back() == '\n')));
    ASSERT_TRUE(b2);
    EXPECT_EQ(b2->outcome.crash_reason, npu::CrashReason::InvalidAccess);
    EXPECT_FALSE(parse_record("1,MAC,acc,0,0,sdc,0,-"));  // SDC needs a positive fraction
    EXPECT_FALSE(parse_record("1,XYZ,acc,0,0,masked,0,-"));
    EXPECT_FALSE(parse_record("garbage"));
}

TEST(Records, TornTailAndCorruption)
{
    const auto dir = sdcnpu::testing::scratch_dir("records_log");
    const auto path = dir / "records.log";
    std::string text = format_header({7, 3}) + "\n";
    for (std::uint64_t i = 0; i < 2; ++i)
    {
        CampaignRecord r;
        r.run_id = i;
        r.site = {BlockId::AO, "act_in", static_cast<std::uint32_t>(i), 0};
        text += format_record(r) + "\n";
    }
    {
        std::ofstream(path, std::ios::binary) << text << "2,AO,act_in,2,0,mas";
    }
    auto log = read_log(path);
    EXPECT_TRUE(log.torn_tail);
    EXPECT_EQ(log.records.size(), 2u);
    EXPECT_EQ(log.valid_bytes, text.size());
    EXPECT_EQ(log.header.plan_fingerprint, 7u);

    {
        std::ofstream(path, std::ios::binary) << text << "5,AO,act_in,2,0,masked,0,-\n";
    }
    try
    {
        read_log(path);
        FAIL() << "expected CorruptLogError";
    }
    catch (const CorruptLogError& e)
    {
        EXPECT_EQ(e.last_valid_run_id(), 1);
    }
}

TEST(Stats, WilsonAtZero)
{
    const auto ci = wilson_interval(0.0, 100, 2.5758293035489);
    EXPECT_EQ(ci.low, 0.0);
    EXPECT_GT(ci.high, 0.0);
    EXPECT_LT(ci.high, 0.07);
}

TEST(Stats, CsvRoundTrip)
{
    std::vector<BlockStats> s(2);
    s[0].block = BlockId::DMA;
    s[0].K = 3;
    s[0].N = 9;
    s[0].sdc_sum = 1.0 / 3.0;
    s[0].sdc_mean = 0.1111111111111111;
    s[0].ci_low = 1e-300;
    s[0].ci_high = 0.7;
    s[1].block = BlockId::WD;
    s[1].crash = 2;
    const auto text = format_stats_csv(s);
    const auto back = parse_stats_csv(text);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(format_stats_csv(back), text);
    EXPECT_EQ(back[0].sdc_sum, s[0].sdc_sum);
    EXPECT_THROW(parse_stats_csv("block,K,N,x\nAO,1\n"), InputError);
    EXPECT_THROW(parse_stats_csv("nonsense"), InputError);
}

TEST(Campaign, ExhaustiveMatchesBruteForce)
{
    const auto t = toy();
    const auto plan = exhaustive_plan(t);
    const auto result = run_campaign(t.model, t.workload, t.golden, plan);
    ASSERT_TRUE(result.complete);
    ASSERT_EQ(result.stats.size(), 6u);
    for (const auto& st : result.stats)
    {
        const std::uint64_t n = t.model.block_bits(st.block) * t.golden.cycle_count;
        double sum = 0.0;
        std::uint64_t crashes = 0;
        for (std::uint64_t i = 0; i < n; ++i)
        {
            const auto r = npu::run_injected(t.model, t.workload, npu::site_from_index(t.model, st.block, i), t.golden);
            sum += r.sdc_fraction;
            crashes += r.kind == npu::OutcomeKind::Crash;
        }
        EXPECT_EQ(st.K, n);
        EXPECT_EQ(st.N, n);
        EXPECT_EQ(st.sdc_sum, sum) << block_name(st.block);
        EXPECT_EQ(st.sdc_mean, sum / static_cast<double>(n)) << block_name(st.block);
        EXPECT_EQ(st.crash, crashes);
        EXPECT_EQ(st.masked + st.sdc + st.crash, n);
    }
}

TEST(Campaign, AllMaskedToy)
{
    const auto t = toy();
    SamplingPlan plan;
    plan.per_block = {{BlockId::REG, 36}};
    plan.registers = {{BlockId::REG, {"cfg7"}}};
    const auto result = run_campaign(t.model, t.workload, t.golden, plan);
    ASSERT_EQ(result.stats.size(), 1u);
    EXPECT_EQ(result.stats[0].sdc_mean, 0.0);
    EXPECT_EQ(result.stats[0].ci_low, 0.0);
    EXPECT_GT(result.stats[0].ci_high, 0.0);
    EXPECT_EQ(result.stats[0].masked, 36u);
}

TEST(Campaign, JobCountInvariance)
{
    const auto t = toy();
    SamplingPlan plan;
    plan.seed = 11;
    plan.per_block = {{BlockId::AO, 200}, {BlockId::DMA, 200}, {BlockId::MAC, 200},
                      {BlockId::REG, 200}, {BlockId::TSU, 200}, {BlockId::WD, 200}};
    const auto dir = sdcnpu::testing::scratch_dir("jobs");
    std::vector<std::string> logs, stats;
    for (unsigned jobs : {1u, 4u, 8u})
    {
        CampaignOptions o;
        o.jobs = jobs;
        o.log_path = dir / ("records" + std::to_string(jobs) + ".log");
        const auto r = run_campaign(t.model, t.workload, t.golden, plan, o);
        logs.push_back(slurp(o.log_path));
        stats.push_back(format_stats_csv(r.stats));
    }
    EXPECT_EQ(logs[0], logs[1]);
    EXPECT_EQ(logs[0], logs[2]);
    EXPECT_EQ(stats[0], stats[1]);
    EXPECT_EQ(stats[0], stats[2]);
}

TEST(Campaign, ResumeAtEveryPrefix)
{
    const auto t = toy();
    SamplingPlan plan;
    plan.seed = 5;
    plan.per_block = {{BlockId::DMA, 25}, {BlockId::REG, 25}, {BlockId::TSU, 25}, {BlockId::WD, 25}};
    const auto dir = sdcnpu::testing::scratch_dir("resume_sweep");
    CampaignOptions full;
    full.log_path = dir / "full.log";
    const auto reference = run_campaign(t.model, t.workload, t.golden, plan, full);
    const auto want_stats = format_stats_csv(reference.stats);
    const auto want_log = slurp(full.log_path);

    for (std::uint64_t k = 0; k <= 100; ++k)
    {
        CampaignOptions o;
        o.log_path = dir / "partial.log";
        o.max_new_runs = k;
        o.jobs = 1 + k % 3;
        const auto first = run_campaign(t.model, t.workload, t.golden, plan, o);
        EXPECT_EQ(first.complete, k >= 100);
        o.max_new_runs.reset();
        const auto resumed = resume_campaign(t.model, t.workload, t.golden, plan, o);
        ASSERT_TRUE(resumed.complete) << k;
        EXPECT_EQ(format_stats_csv(resumed.stats), want_stats) << k;
        EXPECT_EQ(slurp(o.log_path), want_log) << k;
    }
}

TEST(Campaign, ResumeAfterTornWrite)
{
    const auto t = toy();
    SamplingPlan plan;
    plan.per_block = {{BlockId::TSU, 40}};
    const auto dir = sdcnpu::testing::scratch_dir("resume_torn");
    CampaignOptions o;
    o.log_path = dir / "records.log";
    const auto want = format_stats_csv(run_campaign(t.model, t.workload, t.golden, plan, o).stats);
    auto text = slurp(o.log_path);
    // Keep 10 records and half of the 11th.
    std::size_t cut = 0;
    for (int lines = 0; lines < 11; ++lines)
        cut = text.find('\n', cut) + 1;
    const std::size_t next_end = text.find('\n', cut);
    text = text.substr(0, cut + (next_end - cut) / 2);
    std::ofstream(o.log_path, std::ios::binary | std::ios::trunc) << text;
    const auto resumed = resume_campaign(t.model, t.workload, t.golden, plan, o);
    EXPECT_EQ(format_stats_csv(resumed.stats), want);
}

TEST(Campaign, ResumeEmptyLogRunsFull)
{
    const auto t = toy();
    SamplingPlan plan;
    plan.per_block = {{BlockId::WD, 30}};
    const auto dir = sdcnpu::testing::scratch_dir("resume_empty");
    CampaignOptions o;
    o.log_path = dir / "records.log";
    const auto fresh = run_campaign(t.model, t.workload, t.golden, plan);
    std::ofstream(o.log_path).close();
    const auto resumed = resume_campaign(t.model, t.workload, t.golden, plan, o);
    EXPECT_EQ(format_stats_csv(resumed.stats), format_stats_csv(fresh.stats));
    std::filesystem::remove(o.log_path);
    const auto missing = resume_campaign(t.model, t.workload, t.golden, plan, o);
    EXPECT_EQ(format_stats_csv(missing.stats), format_stats_csv(fresh.stats));
}

TEST(Campaign, ResumeRejectsCorruptAndForeignLogs)
{
    const auto t = toy();
    SamplingPlan plan;
    plan.per_block = {{BlockId::WD, 30}};
    const auto dir = sdcnpu::testing::scratch_dir("resume_bad");
    CampaignOptions o;
    o.log_path = dir / "records.log";
    o.max_new_runs = 10;
    run_campaign(t.model, t.workload, t.golden, plan, o);
    o.max_new_runs.reset();

    auto other = plan;
    other.seed = 99;
    EXPECT_THROW(resume_campaign(t.model, t.workload, t.golden, other, o), PlanError);

    auto text = slurp(o.log_path);
    const auto pos = text.find("\n5,");
    text.replace(pos + 1, 2, "x,");
    std::ofstream(o.log_path, std::ios::binary | std::ios::trunc) << text;
    try
    {
        resume_campaign(t.model, t.workload, t.golden, plan, o);
        FAIL() << "expected CorruptLogError";
    }
    catch (const CorruptLogError& e)
    {
        EXPECT_EQ(e.last_valid_run_id(), 4);
    }
}

TEST(Campaign, StopFlagInterrupts)
{
    const auto t = toy();
    SamplingPlan plan;
    plan.per_block = {{BlockId::WD, 30}};
    std::atomic<bool> stop{true};
    CampaignOptions o;
    o.stop = &stop;
    const auto r = run_campaign(t.model, t.workload, t.golden, plan, o);
    EXPECT_FALSE(r.complete);
    EXPECT_TRUE(r.stats.empty());
}

TEST(Campaign, IntervalCalibration)
{
    // Nominal 99% Wilson interval on a 200-sample draw covers the exhaustive mean.
    const auto t = toy();
    const auto exhaustive = run_campaign(t.model, t.workload, t.golden, exhaustive_plan(t));
    std::map<BlockId, double> truth;
    for (const auto& s : exhaustive.stats)
        truth[s.block] = s.sdc_mean;
    int covered = 0, total = 0;
    for (std::uint64_t seed = 1; seed <= 200; ++seed)
    {
        SamplingPlan plan;
        plan.seed = seed;
        plan.per_block = {{BlockId::MAC, 200}, {BlockId::TSU, 200}};
        for (const auto& s : run_campaign(t.model, t.workload, t.golden, plan).stats)
        {
            covered += s.ci_low <= truth[s.block] && truth[s.block] <= s.ci_high;
            ++total;
        }
    }
    EXPECT_GE(covered, total * 95 / 100) << covered << "/" << total;
}

TEST(Campaign, UnwritableLogIsIoError)
{
    const auto t = toy();
    SamplingPlan plan;
    plan.per_block = {{BlockId::WD, 3}};
    CampaignOptions o;
    o.log_path = "/nonexistent-dir/records.log";
    EXPECT_THROW(run_campaign(t.model, t.workload, t.golden, plan, o), IoError);
}
