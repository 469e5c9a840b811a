#include "sdcnpu/campaign/sampling.hpp"

#include "sdcnpu/error.hpp"

#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_set>

namespace sdcnpu::campaign
{

namespace
{

bool in_open_unit(double x) { return x > 0.0 && x < 1.0; }

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Uniform in [0, bound) by rejection, independent of the standard library's
/// distribution implementation.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound)
{
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do
        x = rng();
    while (x >= limit);
    return x % bound;
}

} // namespace

double z_for_confidence(double confidence)
{
    if (!in_open_unit(confidence))
        throw DomainError(fmt::format("confidence {} outside (0,1)", confidence));
    const boost::math::normal_distribution<double> standard;
    return boost::math::quantile(standard, 1.0 - (1.0 - confidence) / 2.0);
}

std::uint64_t sample_size(double population, double margin, double confidence, double p)
{
    if (!(population >= 1.0))
        throw DomainError("population must be at least 1");
    if (!in_open_unit(margin))
        throw DomainError(fmt::format("margin {} outside (0,1)", margin));
    if (!in_open_unit(p))
        throw DomainError(fmt::format("p {} outside (0,1)", p));
    const double z = z_for_confidence(confidence);
    const double infinite = z * z * p * (1.0 - p) / (margin * margin);
    if (std::isinf(population))
        return static_cast<std::uint64_t>(std::ceil(infinite));
    const double n = population / (1.0 + (population - 1.0) / infinite);
    return std::clamp<std::uint64_t>(static_cast<std::uint64_t>(std::ceil(n)), 1,
                                     static_cast<std::uint64_t>(population));
}

BlockSpace::BlockSpace(const npu::NpuModel& model, BlockId block, std::uint64_t cycles,
                       const std::vector<std::string>& only_registers)
    : block_(block), cycles_(cycles)
{
    for (const std::string& name : only_registers)
        if (model.find(block, name) == npu::NpuModel::npos)
            throw PlanError(fmt::format("block {} has no register '{}'", block_name(block), name));
    for (std::size_t idx : model.block_registers(block))
    {
        const auto& spec = model.registers()[idx];
        if (!only_registers.empty() &&
            std::find(only_registers.begin(), only_registers.end(), spec.name) == only_registers.end())
            continue;
        regs_.push_back({spec.name, spec.width_bits});
        bits_ += spec.width_bits;
    }
}

npu::FaultSite BlockSpace::site(std::uint64_t index) const
{
    if (index >= population())
        throw DomainError(fmt::format("site index {} outside block {} population {}", index, block_name(block_),
                                      population()));
    npu::FaultSite s;
    s.block = block_;
    s.cycle = index / bits_;
    std::uint64_t offset = index % bits_;
    for (const Reg& r : regs_)
    {
        if (offset < r.width)
        {
            s.reg = r.name;
            s.bit = static_cast<std::uint32_t>(offset);
            break;
        }
        offset -= r.width;
    }
    return s;
}

std::vector<BlockSpace> plan_spaces(const npu::NpuModel& model, const npu::GoldenResult& golden,
                                    const SamplingPlan& plan)
{
    std::vector<BlockSpace> spaces;
    for (const auto& [block, k] : plan.per_block)
    {
        static const std::vector<std::string> all;
        auto it = plan.registers.find(block);
        spaces.emplace_back(model, block, golden.cycle_count, it == plan.registers.end() ? all : it->second);
    }
    return spaces;
}

void validate_plan(const SamplingPlan& plan, const std::vector<BlockSpace>& spaces)
{
    if (!in_open_unit(plan.margin))
        throw PlanError(fmt::format("margin {} outside (0,1)", plan.margin));
    if (!in_open_unit(plan.confidence))
        throw PlanError(fmt::format("confidence {} outside (0,1)", plan.confidence));
    if (plan.per_block.empty())
        throw PlanError("plan samples no block");
    for (const auto& [block, k] : plan.per_block)
    {
        auto it = std::find_if(spaces.begin(), spaces.end(), [b = block](const BlockSpace& s) { return s.block() == b; });
        if (it == spaces.end())
            throw PlanError(fmt::format("no fault space for block {}", block_name(block)));
        if (k == 0)
            throw PlanError(fmt::format("block {}: sample count must be at least 1", block_name(block)));
        if (k > it->population())
            throw PlanError(fmt::format("block {}: sample count {} exceeds population {}", block_name(block), k,
                                        it->population()));
    }
}

std::map<BlockId, std::uint64_t> allocate_proportional(const PerBlock<std::uint64_t>& populations, std::uint64_t total)
{
    const std::uint64_t n = std::accumulate(populations.begin(), populations.end(), std::uint64_t{0});
    std::map<BlockId, std::uint64_t> out;
    if (n == 0)
        return out;
    total = std::min(total, n);
    std::vector<std::pair<double, BlockId>> remainders;
    std::uint64_t assigned = 0;
    for (BlockId b : kAllBlocks)
    {
        const std::uint64_t nk = populations[index_of(b)];
        if (nk == 0)
            continue;
        const double exact = static_cast<double>(total) * static_cast<double>(nk) / static_cast<double>(n);
        const auto k = static_cast<std::uint64_t>(std::floor(exact));
        out[b] = k;
        assigned += k;
        remainders.emplace_back(exact - static_cast<double>(k), b);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < total && i < remainders.size(); ++i, ++assigned)
        ++out[remainders[i].second];
    for (auto& [b, k] : out)
        k = std::clamp<std::uint64_t>(k, 1, populations[index_of(b)]);
    return out;
}

std::map<BlockId, std::uint64_t> allocate_fraction(const PerBlock<std::uint64_t>& populations, double fraction)
{
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw DomainError(fmt::format("sample fraction {} outside (0,1]", fraction));
    std::map<BlockId, std::uint64_t> out;
    for (BlockId b : kAllBlocks)
    {
        const std::uint64_t nk = populations[index_of(b)];
        if (nk == 0)
            continue;
        const auto k = static_cast<std::uint64_t>(std::ceil(fraction * static_cast<double>(nk)));
        out[b] = std::clamp<std::uint64_t>(k, 1, nk);
    }
    return out;
}

std::vector<std::vector<std::uint64_t>> draw_indices(const SamplingPlan& plan, const std::vector<BlockSpace>& spaces)
{
    validate_plan(plan, spaces);
    std::vector<std::vector<std::uint64_t>> out;
    for (const BlockSpace& space : spaces)
    {
        const std::uint64_t n = space.population();
        const std::uint64_t k = plan.per_block.at(space.block());
        std::vector<std::uint64_t> picked;
        picked.reserve(k);
        if (k == n)
        {
            picked.resize(n);
            std::iota(picked.begin(), picked.end(), std::uint64_t{0});
        }
        else
        {
            // Floyd's algorithm: each k-subset equally likely, k RNG calls.
            std::mt19937_64 rng(splitmix64(plan.seed ^ splitmix64(index_of(space.block()) + 1)));
            std::unordered_set<std::uint64_t> chosen;
            chosen.reserve(k * 2);
            for (std::uint64_t j = n - k; j < n; ++j)
            {
                const std::uint64_t t = uniform_below(rng, j + 1);
                const std::uint64_t v = chosen.insert(t).second ? t : j;
                if (v == j)
                    chosen.insert(j);
                picked.push_back(v);
            }
            std::sort(picked.begin(), picked.end());
        }
        out.push_back(std::move(picked));
    }
    return out;
}

std::vector<npu::FaultSite> draw_samples(const SamplingPlan& plan, const std::vector<BlockSpace>& spaces)
{
    const auto indices = draw_indices(plan, spaces);
    std::vector<npu::FaultSite> sites;
    for (std::size_t i = 0; i < spaces.size(); ++i)
        for (std::uint64_t idx : indices[i])
            sites.push_back(spaces[i].site(idx));
    return sites;
}

} // namespace sdcnpu::campaign
