#include "sdcnpu/protection/optimizer.hpp"

#include "sdcnpu/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace sdcnpu::protection
{

namespace
{

/// Per-block, per-scheme terms evaluated once per problem.
struct Table
{
    std::vector<std::vector<double>> contribution;
    std::vector<std::vector<double>> area;
    double baseline = 0.0;
};

Table tabulate(const ProtectionProblem& problem)
{
    Table t;
    t.baseline = baseline_area(problem);
    for (const auto& block : problem.blocks)
    {
        const double p = block_probability(problem, block);
        std::vector<double> c, a;
        for (const auto& scheme : problem.schemes)
        {
            c.push_back(apply_scheme(block.sdc_sites, p, scheme, problem.logic_faults, block.fit).contribution);
            a.push_back(added_area(block.area, scheme, problem.delta_pct));
        }
        t.contribution.push_back(std::move(c));
        t.area.push_back(std::move(a));
    }
    return t;
}

EvaluatedConfig evaluate_with(const ProtectionProblem& problem, const Table& t, const Assignment& assignment)
{
    EvaluatedConfig e;
    e.assignment = assignment;
    double area = t.baseline;
    for (std::size_t b = 0; b < assignment.size(); ++b)
    {
        e.sdc_npu += t.contribution[b][assignment[b]];
        area += t.area[b][assignment[b]];
    }
    e.total_area = area;
    e.area_overhead_pct = t.baseline > 0.0 ? (area - t.baseline) / t.baseline * 100.0 : 0.0;
    e.meets_target = problem.target && reliability::meets_asil(e.sdc_npu, *problem.target);
    return e;
}

std::vector<int> codes(const ProtectionProblem& problem, const Assignment& a)
{
    std::vector<int> out;
    for (auto s : a)
        out.push_back(scheme_code(problem.schemes[s].kind));
    return out;
}

void check(const ProtectionProblem& problem, const Assignment& assignment)
{
    if (assignment.size() != problem.blocks.size())
        throw DomainError(fmt::format("assignment has {} entries for {} blocks", assignment.size(),
                                      problem.blocks.size()));
    for (auto s : assignment)
        if (s >= problem.schemes.size())
            throw DomainError(fmt::format("scheme index {} out of range", s));
}

std::vector<EvaluatedConfig> evaluate_all(const ProtectionProblem& problem)
{
    if (problem.blocks.empty())
        throw DomainError("protection problem has no blocks");
    if (problem.schemes.empty())
        throw DomainError("protection problem has no schemes");
    const Table t = tabulate(problem);
    std::vector<EvaluatedConfig> all;
    for (const auto& a : enumerate_design_space(problem.blocks.size(), problem.schemes.size(), problem.design_space_cap))
        all.push_back(evaluate_with(problem, t, a));
    return all;
}

} // namespace

double block_probability(const ProtectionProblem& problem, const BlockProfile& block)
{
    const double fit = problem.logic_faults ? reliability::adjusted_fit(block.fit.fit, block.fit.alpha) : block.fit.fit;
    return reliability::fault_probability(fit, problem.freq_hz);
}

double baseline_area(const ProtectionProblem& problem)
{
    double area = problem.fixed_area;
    for (const auto& b : problem.blocks)
        area += b.area.total_area;
    return area;
}

AreaSummary config_area(const ProtectionProblem& problem, const Assignment& assignment)
{
    check(problem, assignment);
    const double base = baseline_area(problem);
    double area = base;
    for (std::size_t b = 0; b < assignment.size(); ++b)
        area += added_area(problem.blocks[b].area, problem.schemes[assignment[b]], problem.delta_pct);
    return {area, base > 0.0 ? (area - base) / base * 100.0 : 0.0};
}

EvaluatedConfig evaluate(const ProtectionProblem& problem, const Assignment& assignment)
{
    check(problem, assignment);
    return evaluate_with(problem, tabulate(problem), assignment);
}

std::vector<Assignment> enumerate_design_space(std::size_t block_count, std::size_t scheme_count, std::uint64_t cap)
{
    if (scheme_count == 0 || scheme_count > 256)
        throw DomainError("scheme count must be in [1, 256]");
    std::uint64_t total = 1;
    for (std::size_t i = 0; i < block_count; ++i)
    {
        if (total > cap / scheme_count)
            throw CapacityError(fmt::format("design space {}^{} exceeds the cap of {}", scheme_count, block_count, cap));
        total *= scheme_count;
    }
    if (total > cap)
        throw CapacityError(fmt::format("design space {}^{} exceeds the cap of {}", scheme_count, block_count, cap));

    std::vector<Assignment> out;
    out.reserve(total);
    Assignment a(block_count, 0);
    for (std::uint64_t n = 0; n < total; ++n)
    {
        out.push_back(a);
        for (std::size_t i = block_count; i-- > 0;)
        {
            if (++a[i] < scheme_count)
                break;
            a[i] = 0;
        }
    }
    return out;
}

std::vector<EvaluatedConfig> pareto_frontier(std::vector<EvaluatedConfig> points)
{
    if (points.empty())
        throw DomainError("pareto_frontier needs at least one point");
    std::sort(points.begin(), points.end(), [](const EvaluatedConfig& x, const EvaluatedConfig& y) {
        if (x.total_area != y.total_area)
            return x.total_area < y.total_area;
        if (x.sdc_npu != y.sdc_npu)
            return x.sdc_npu < y.sdc_npu;
        return x.assignment < y.assignment;
    });

    // A point survives iff it has the lowest sdc within its area group and that
    // sdc is strictly below every point of smaller area.
    std::vector<EvaluatedConfig> frontier;
    double best_before = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points.size();)
    {
        std::size_t j = i;
        while (j < points.size() && points[j].total_area == points[i].total_area)
            ++j;
        const double group_min = points[i].sdc_npu;
        if (group_min < best_before)
        {
            for (std::size_t k = i; k < j && points[k].sdc_npu == group_min; ++k)
                frontier.push_back(points[k]);
            best_before = group_min;
        }
        i = j;
    }
    return frontier;
}

OptimizeResult optimize(const ProtectionProblem& problem, double area_budget)
{
    auto all = evaluate_all(problem);
    OptimizeResult result;
    for (const auto& e : all)
    {
        if (!(e.total_area <= area_budget))
            continue;
        if (!result.best)
        {
            result.best = e;
            continue;
        }
        const auto& b = *result.best;
        const bool better = e.sdc_npu < b.sdc_npu ||
                            (e.sdc_npu == b.sdc_npu &&
                             (e.total_area < b.total_area ||
                              (e.total_area == b.total_area && codes(problem, e.assignment) < codes(problem, b.assignment))));
        if (better)
            result.best = e;
    }
    result.frontier = pareto_frontier(std::move(all));
    return result;
}

OptimizeResult min_area(const ProtectionProblem& problem)
{
    if (!problem.target)
        throw InputError("min_area needs an ASIL target");
    auto all = evaluate_all(problem);
    OptimizeResult result;
    for (const auto& e : all)
    {
        if (!e.meets_target)
            continue;
        if (!result.best)
        {
            result.best = e;
            continue;
        }
        const auto& b = *result.best;
        const bool better = e.total_area < b.total_area ||
                            (e.total_area == b.total_area &&
                             (e.sdc_npu < b.sdc_npu ||
                              (e.sdc_npu == b.sdc_npu && codes(problem, e.assignment) < codes(problem, b.assignment))));
        if (better)
            result.best = e;
    }
    result.frontier = pareto_frontier(std::move(all));
    return result;
}

std::vector<int> assignment_codes(const ProtectionProblem& problem, const Assignment& assignment)
{
    check(problem, assignment);
    return codes(problem, assignment);
}

} // namespace sdcnpu::protection
