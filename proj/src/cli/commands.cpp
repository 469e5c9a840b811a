#include "sdcnpu/cli/commands.hpp"

#include "sdcnpu/error.hpp"
#include "sdcnpu/npu/simulator.hpp"
#include "sdcnpu/reliability/model.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>

namespace sdcnpu::cli
{

namespace fs = std::filesystem;

namespace
{

struct Options
{
    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    std::optional<std::string> node;
    bool logic_faults = false;
    unsigned jobs = 1;
    bool resume = false;
    std::optional<std::uint64_t> max_runs;
    std::optional<double> budget;
    std::optional<std::string> target;
    std::string stats;
    // inject
    std::string block, reg;
    std::uint32_t bit = 0;
    std::uint64_t cycle = 0;
};

/// Human tables round to four significant digits.
std::string sig4(double x) { return fmt::format("{:.4g}", x); }

std::string read_file(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw IoError(fmt::format("cannot read '{}'", p.string()));
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_file(const fs::path& p, const std::string& text)
{
    std::error_code ec;
    if (p.has_parent_path())
        fs::create_directories(p.parent_path(), ec);
    const fs::path tmp = p.string() + ".tmp";
    {
        std::ofstream o(tmp, std::ios::binary | std::ios::trunc);
        if (!o || !(o << text) || !o.flush())
            throw IoError(fmt::format("cannot write '{}'", p.string()));
    }
    fs::rename(tmp, p, ec);
    if (ec)
        throw IoError(fmt::format("cannot write '{}': {}", p.string(), ec.message()));
}

project::ProjectConfig load(const Options& o)
{
    auto c = project::load_project(o.config);
    if (o.seed)
        c.sampling.seed = *o.seed;
    if (o.node)
        project::select_node(c, *o.node);
    return c;
}

bool logic_enabled(const Options& o, const project::ProjectConfig& c) { return o.logic_faults || c.logic.enabled; }

reliability::AsilLevel target_level(const Options& o, const project::ProjectConfig& c)
{
    if (!o.target)
        return c.asil.level;
    const auto l = reliability::parse_asil(*o.target);
    if (!l)
        throw ConfigError("--target", "expected asil-b, asil-c or asil-d");
    return *l;
}

std::vector<campaign::BlockStats> load_stats(const Options& o)
{
    const fs::path p = o.stats.empty() ? fs::path(o.out) / "stats.csv" : fs::path(o.stats);
    if (!fs::exists(p))
        throw IoError(fmt::format("stats file '{}' not found; run the campaign first", p.string()));
    return campaign::parse_stats_csv(read_file(p));
}

std::string codes_text(const protection::ProtectionProblem& problem, const protection::Assignment& a)
{
    const auto codes = protection::assignment_codes(problem, a);
    return fmt::format("[{}]", fmt::join(codes, ","));
}

int cmd_sites(const Options& o, std::ostream& out)
{
    const auto c = load(o);
    const auto model = npu::build_npu(c.npu);
    const auto golden = npu::run_golden(model, c.workload);
    const auto n = npu::enumerate_fault_sites(model, golden);
    fmt::print(out, "{:<6} {:>8} {:>8} {:>14}\n", "block", "bits", "cycles", "N_K");
    std::uint64_t total = 0;
    for (BlockId b : kAllBlocks)
    {
        fmt::print(out, "{:<6} {:>8} {:>8} {:>14}\n", block_name(b), model.block_bits(b), golden.cycle_count,
                   n[index_of(b)]);
        total += n[index_of(b)];
    }
    fmt::print(out, "{:<6} {:>8} {:>8} {:>14}\n", "total", std::accumulate(kAllBlocks.begin(), kAllBlocks.end(),
                                                                           std::uint64_t{0},
                                                                           [&](std::uint64_t s, BlockId b) {
                                                                               return s + model.block_bits(b);
                                                                           }),
               golden.cycle_count, total);
    return kExitOk;
}

int cmd_golden(const Options& o, std::ostream& out)
{
    const auto c = load(o);
    const auto model = npu::build_npu(c.npu);
    const auto golden = npu::run_golden(model, c.workload);
    fmt::print(out, "workload {}: {} inputs, {} cycles per inference\n", c.workload.name, golden.top1_labels.size(),
               golden.cycle_count);
    fmt::print(out, "top1 [{}]\n", fmt::join(golden.top1_labels, ","));
    fmt::print(out, "state digest {:016x}\n", golden.state_digest);
    return kExitOk;
}

int cmd_inject(const Options& o, std::ostream& out)
{
    const auto c = load(o);
    const auto model = npu::build_npu(c.npu);
    const auto golden = npu::run_golden(model, c.workload);
    const auto b = parse_block(o.block);
    if (!b)
        throw ConfigError("--block", "expected AO, DMA, MAC, REG, TSU or WD");
    const npu::FaultSite site{*b, o.reg, o.bit, o.cycle};
    const auto r = npu::run_injected(model, c.workload, site, golden);
    fmt::print(out, "{} {} bit {} cycle {}: {}", o.block, o.reg, o.bit, o.cycle, npu::outcome_name(r.kind));
    if (r.kind == npu::OutcomeKind::SDC)
        fmt::print(out, " sdc_fraction {}", campaign::format_double(r.sdc_fraction));
    if (r.crash_reason)
        fmt::print(out, " ({})", npu::crash_reason_name(*r.crash_reason));
    fmt::print(out, "\n");
    return kExitOk;
}

void print_stats(std::ostream& out, const std::vector<campaign::BlockStats>& stats)
{
    fmt::print(out, "{:<6} {:>8} {:>12} {:>10} {:>10} {:>10} {:>10}\n", "block", "K", "N", "sdc_mean", "ci_low",
               "ci_high", "crash");
    for (const auto& s : stats)
        fmt::print(out, "{:<6} {:>8} {:>12} {:>10} {:>10} {:>10} {:>10}\n", block_name(s.block), s.K, s.N,
                   sig4(s.sdc_mean), sig4(s.ci_low), sig4(s.ci_high), sig4(s.crash_rate));
}

int cmd_campaign(const Options& o, std::ostream& out, const std::atomic<bool>* stop)
{
    const auto c = load(o);
    const auto model = npu::build_npu(c.npu);
    const auto golden = npu::run_golden(model, c.workload);
    const auto plan = build_plan(c, model, golden);

    std::error_code ec;
    fs::create_directories(o.out, ec);
    if (ec)
        throw IoError(fmt::format("cannot create '{}': {}", o.out, ec.message()));
    campaign::CampaignOptions opts;
    opts.jobs = o.jobs;
    opts.log_path = fs::path(o.out) / "records.log";
    opts.max_new_runs = o.max_runs;
    opts.stop = stop;
    const auto result = o.resume ? campaign::resume_campaign(model, c.workload, golden, plan, opts)
                                 : campaign::run_campaign(model, c.workload, golden, plan, opts);
    if (!result.complete)
    {
        fmt::print(out, "interrupted after {} records; continue with --resume\n", result.records.size());
        return kExitInterrupted;
    }
    write_file(fs::path(o.out) / "stats.csv", campaign::format_stats_csv(result.stats));
    fmt::print(out, "{} injections\n", result.records.size());
    print_stats(out, result.stats);
    return kExitOk;
}

reliability::SitePopulation population(const project::ProjectConfig& c, const std::vector<campaign::BlockStats>& stats,
                                       bool logic)
{
    reliability::SitePopulation pop;
    for (const auto& s : stats)
    {
        pop.sites[index_of(s.block)] = s.N;
        pop.probability[index_of(s.block)] = project::block_probability(c, s.block, logic);
    }
    return pop;
}

int cmd_estimate(const Options& o, std::ostream& out)
{
    const auto c = load(o);
    const auto stats = load_stats(o);
    const bool logic = logic_enabled(o, c);
    const auto base = reliability::sdc_npu_estimate(stats, population(c, stats, false));
    const auto with_logic = reliability::sdc_npu_estimate(stats, population(c, stats, true));
    const auto& active = logic ? with_logic : base;
    const auto level = target_level(o, c);
    const auto target = project::resolve_target(c, level);
    const bool met = reliability::meets_asil(active.sdc_npu, target);

    std::string csv = "block,N,K,sdc_sum,p_cycle,p_cycle_logic,contribution,contribution_logic\n";
    for (const auto& s : stats)
    {
        const auto i = index_of(s.block);
        csv += fmt::format("{},{},{},{},{},{},{},{}\n", block_name(s.block), s.N, s.K,
                           campaign::format_double(s.sdc_sum),
                           campaign::format_double(project::block_probability(c, s.block, false)),
                           campaign::format_double(project::block_probability(c, s.block, true)),
                           campaign::format_double(base.contribution[i]),
                           campaign::format_double(with_logic.contribution[i]));
    }
    csv += fmt::format("total,,,,,,{},{}\n", campaign::format_double(base.sdc_npu),
                       campaign::format_double(with_logic.sdc_npu));
    csv += fmt::format("# active={} sdc_npu={} lower={} upper={} target={} threshold={} meets={}\n",
                       logic ? "logic" : "flops", campaign::format_double(active.sdc_npu),
                       campaign::format_double(active.lower), campaign::format_double(active.upper),
                       reliability::asil_name(level), campaign::format_double(target.threshold_per_inference),
                       met ? "yes" : "no");
    write_file(fs::path(o.out) / "estimate.csv", csv);

    const auto fit = project::block_fit(c, BlockId::AO);
    fmt::print(out, "node {}: FIT/MB {}, alpha {}\n", c.tech.name, sig4(fit.fit), sig4(fit.alpha));
    fmt::print(out, "upset probability per bit: {} per cycle, {} per second\n",
               sig4(reliability::fault_probability(fit.fit, c.freq_ghz * 1e9)),
               sig4(reliability::fault_probability_per_second(fit.fit)));
    fmt::print(out, "{:<6} {:>12} {:>12}\n", "block", "flops only", "with logic");
    for (const auto& s : stats)
        fmt::print(out, "{:<6} {:>12} {:>12}\n", block_name(s.block), sig4(base.contribution[index_of(s.block)]),
                   sig4(with_logic.contribution[index_of(s.block)]));
    fmt::print(out, "{:<6} {:>12} {:>12}\n", "total", sig4(base.sdc_npu), sig4(with_logic.sdc_npu));
    fmt::print(out, "SDC_NPU ({}) = {} per inference, interval [{}, {}]\n", logic ? "with logic" : "flops only",
               sig4(active.sdc_npu), sig4(active.lower), sig4(active.upper));
    fmt::print(out, "{} threshold {}: {}\n", reliability::asil_name(level), sig4(target.threshold_per_inference),
               met ? "met" : "violated");
    return kExitOk;
}

int cmd_optimize(const Options& o, std::ostream& out)
{
    const auto c = load(o);
    const auto stats = load_stats(o);
    const bool logic = logic_enabled(o, c);
    auto problem = build_problem(c, stats, logic);
    problem.target = project::resolve_target(c, target_level(o, c));

    protection::OptimizeResult result;
    std::string mode;
    double limit = 0.0;
    if (o.budget)
    {
        if (!(*o.budget >= 0.0))
            throw ConfigError("--budget", "must be a non-negative area overhead percentage");
        limit = protection::baseline_area(problem) * (1.0 + *o.budget / 100.0);
        result = protection::optimize(problem, limit);
        mode = "budget";
    }
    else
    {
        result = protection::min_area(problem);
        limit = problem.target->threshold_per_inference;
        mode = "target";
    }

    write_file(fs::path(o.out) / "frontier.csv", format_configs_csv(problem, result.frontier));
    std::string csv = fmt::format("# mode={} limit={} logic={} feasible={}\n", mode, campaign::format_double(limit),
                                  logic ? "on" : "off", result.best ? "yes" : "no");
    csv += format_configs_csv(problem, result.best ? std::vector{*result.best} : std::vector<protection::EvaluatedConfig>{});
    write_file(fs::path(o.out) / "optimize.csv", csv);

    fmt::print(out, "Pareto frontier: {} configurations\n", result.frontier.size());
    if (!result.best)
    {
        fmt::print(out, "infeasible: no assignment satisfies the {} {}\n", mode,
                   mode == "budget" ? "area" : "ASIL target");
        return kExitInfeasible;
    }
    const auto& b = *result.best;
    fmt::print(out, "assignment {} (block order AO,DMA,MAC,REG,TSU,WD)\n", codes_text(problem, b.assignment));
    fmt::print(out, "area {} (+{}%), SDC_NPU {} per inference, {} {}\n", sig4(b.total_area),
               sig4(b.area_overhead_pct), sig4(b.sdc_npu), reliability::asil_name(problem.target->level),
               b.meets_target ? "met" : "violated");
    return kExitOk;
}

} // namespace

campaign::SamplingPlan build_plan(const project::ProjectConfig& config, const npu::NpuModel& model,
                                  const npu::GoldenResult& golden)
{
    const auto& s = config.sampling;
    campaign::SamplingPlan plan;
    plan.seed = s.seed;
    plan.margin = s.margin;
    plan.confidence = s.confidence;
    for (BlockId b : s.blocks)
        if (const auto it = s.registers.find(b); it != s.registers.end())
            plan.registers[b] = it->second;

    PerBlock<std::uint64_t> pops{};
    for (BlockId b : s.blocks)
    {
        const auto it = plan.registers.find(b);
        const campaign::BlockSpace space(model, b, golden.cycle_count,
                                         it == plan.registers.end() ? std::vector<std::string>{} : it->second);
        pops[index_of(b)] = space.population();
    }
    switch (s.allocation)
    {
    case project::Allocation::Proportional:
    {
        const auto total = std::accumulate(pops.begin(), pops.end(), std::uint64_t{0});
        if (total > 0)
            plan.per_block = campaign::allocate_proportional(
                pops, campaign::sample_size(static_cast<double>(total), s.margin, s.confidence, s.p));
        break;
    }
    case project::Allocation::Fraction: plan.per_block = campaign::allocate_fraction(pops, s.fraction); break;
    case project::Allocation::Explicit:
        for (BlockId b : s.blocks)
            plan.per_block[b] = s.counts.at(b);
        break;
    }
    return plan;
}

protection::ProtectionProblem build_problem(const project::ProjectConfig& config,
                                            const std::vector<campaign::BlockStats>& stats, bool logic_faults)
{
    protection::ProtectionProblem p;
    p.schemes = config.schemes;
    p.freq_hz = config.freq_ghz * 1e9;
    p.logic_faults = logic_faults;
    p.fixed_area = config.fixed_area;
    p.design_space_cap = config.design_space_cap;
    const bool needs_delta = std::any_of(p.schemes.begin(), p.schemes.end(),
                                         [](const auto& s) { return s.kind == protection::SchemeKind::DMR; });
    p.delta_pct = needs_delta ? project::resolve_delta(config) : 0.0;
    for (BlockId b : kAllBlocks)
    {
        protection::BlockProfile bp;
        bp.name = std::string(block_name(b));
        bp.fit = project::block_fit(config, b);
        bp.area = config.areas[index_of(b)];
        for (const auto& s : stats)
            if (s.block == b)
            {
                if (s.K == 0)
                    throw InputError(fmt::format("stats for {} have no samples", block_name(b)));
                bp.sdc_sites = static_cast<double>(s.N) / static_cast<double>(s.K) * s.sdc_sum;
            }
        p.blocks.push_back(bp);
    }
    return p;
}

std::string format_configs_csv(const protection::ProtectionProblem& problem,
                               const std::vector<protection::EvaluatedConfig>& configs)
{
    std::string out = "total_area,area_overhead_pct,sdc_npu,meets_target";
    for (const auto& b : problem.blocks)
        out += "," + b.name;
    out += "\n";
    for (const auto& e : configs)
    {
        out += fmt::format("{},{},{},{}", campaign::format_double(e.total_area),
                           campaign::format_double(e.area_overhead_pct), campaign::format_double(e.sdc_npu),
                           e.meets_target ? 1 : 0);
        for (int code : protection::assignment_codes(problem, e.assignment))
            out += fmt::format(",{}", code);
        out += "\n";
    }
    return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const std::atomic<bool>* stop)
{
    CLI::App app{"Soft-error SDC analysis for a functional-block NPU model", "sdcnpu"};
    app.require_subcommand(1);
    Options o;

    const auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "Project config file")->required();
        sub->add_option("--out", o.out, "Output directory")->capture_default_str();
        sub->add_option("--node", o.node, "Technology preset")->check(CLI::IsMember({"16nm", "7nm"}));
    };

    auto* sites = app.add_subcommand("sites", "Per-block fault-site counts");
    common(sites);
    auto* golden = app.add_subcommand("golden", "Fault-free reference run");
    common(golden);
    auto* inject = app.add_subcommand("inject", "Single bit-flip injection");
    common(inject);
    inject->add_option("--block", o.block)->required();
    inject->add_option("--reg", o.reg)->required();
    inject->add_option("--bit", o.bit)->required();
    inject->add_option("--cycle", o.cycle)->required();

    auto* camp = app.add_subcommand("campaign", "Sampled fault-injection campaign");
    common(camp);
    camp->add_option("--seed", o.seed, "Sampling seed (overrides the config)");
    camp->add_option("--jobs", o.jobs, "Parallel workers")->check(CLI::Range(1u, 1024u))->capture_default_str();
    camp->add_flag("--resume", o.resume, "Continue an existing record log");
    camp->add_option("--max-runs", o.max_runs, "Stop after this many new injections");

    const auto analysis = [&](CLI::App* sub) {
        common(sub);
        sub->add_flag("--logic-faults", o.logic_faults, "Include combinational-logic faults");
        sub->add_option("--stats", o.stats, "Stats file (default <out>/stats.csv)");
        sub->add_option("--seed", o.seed, "Accepted for pipeline symmetry");
    };
    auto* estimate = app.add_subcommand("estimate", "SDC rate per inference from campaign stats");
    analysis(estimate);
    estimate->add_option("--target", o.target, "ASIL level for the verdict")
        ->check(CLI::IsMember({"asil-b", "asil-c", "asil-d"}));
    auto* optimize = app.add_subcommand("optimize", "Per-block protection assignment");
    analysis(optimize);
    auto* budget = optimize->add_option("--budget", o.budget, "Area overhead budget in percent of baseline area");
    optimize->add_option("--target", o.target, "ASIL level to meet at minimum area")
        ->check(CLI::IsMember({"asil-b", "asil-c", "asil-d"}))
        ->excludes(budget);

    try
    {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    }
    catch (const CLI::ParseError& e)
    {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try
    {
        if (*sites)
            return cmd_sites(o, out);
        if (*golden)
            return cmd_golden(o, out);
        if (*inject)
            return cmd_inject(o, out);
        if (*camp)
            return cmd_campaign(o, out, stop);
        if (*estimate)
            return cmd_estimate(o, out);
        if (*optimize)
            return cmd_optimize(o, out);
    }
    catch (const ConfigError& e)
    {
        fmt::print(err, "config error: {}\n", e.what());
        return kExitUsage;
    }
    catch (const IoError& e)
    {
        fmt::print(err, "I/O error: {}\n", e.what());
        return kExitIo;
    }
    catch (const CorruptLogError& e)
    {
        fmt::print(err, "I/O error: {} (last valid run {})\n", e.what(), e.last_valid_run_id());
        return kExitIo;
    }
    catch (const Error& e)
    {
        fmt::print(err, "error: {}\n", e.what());
        return kExitUsage;
    }
    catch (const std::filesystem::filesystem_error& e)
    {
        fmt::print(err, "I/O error: {}\n", e.what());
        return kExitIo;
    }
    return kExitUsage;
}

} // namespace sdcnpu::cli
