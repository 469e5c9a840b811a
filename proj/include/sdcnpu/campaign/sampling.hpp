#pragma once

#include "sdcnpu/blocks.hpp"
#include "sdcnpu/npu/model.hpp"
#include "sdcnpu/npu/simulator.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace sdcnpu::campaign
{

/// Two-sided standard-normal quantile: z with P(|Z| <= z) = confidence.
double z_for_confidence(double confidence);

/// Finite-population sample size for estimating a proportion:
///   n = ceil( N / (1 + margin^2 (N-1) / (z^2 p (1-p))) ),  capped at N.
/// `population` may be +infinity, giving ceil(z^2 p (1-p) / margin^2).
/// Throws DomainError for margin, confidence or p outside (0,1) or N < 1.
std::uint64_t sample_size(double population, double margin, double confidence, double p = 0.5);

/// The (register-bit x cycle) grid of one block, optionally restricted to a
/// subset of its registers. Flat index = cycle * bits + bit offset.
class BlockSpace
{
  public:
    BlockSpace(const npu::NpuModel& model, BlockId block, std::uint64_t cycles,
               const std::vector<std::string>& only_registers = {});

    BlockId block() const noexcept { return block_; }
    std::uint64_t bits() const noexcept { return bits_; }
    std::uint64_t cycles() const noexcept { return cycles_; }
    std::uint64_t population() const noexcept { return bits_ * cycles_; }

    npu::FaultSite site(std::uint64_t index) const;

  private:
    struct Reg
    {
        std::string name;
        std::uint32_t width;
    };
    BlockId block_;
    std::vector<Reg> regs_;
    std::uint64_t bits_ = 0;
    std::uint64_t cycles_ = 0;
};

struct SamplingPlan
{
    /// Blocks to sample and their sample counts K_block. Absent blocks are not sampled.
    std::map<BlockId, std::uint64_t> per_block;
    std::uint64_t seed = 1;
    double margin = 0.01;
    double confidence = 0.99;
    /// Optional per-block register restriction of the fault space.
    std::map<BlockId, std::vector<std::string>> registers;
};

/// Fault spaces for every block named in the plan, in canonical block order.
std::vector<BlockSpace> plan_spaces(const npu::NpuModel& model, const npu::GoldenResult& golden,
                                    const SamplingPlan& plan);

/// Throws PlanError unless every planned block has 1 <= K <= N and the plan's
/// margin and confidence lie in (0,1).
void validate_plan(const SamplingPlan& plan, const std::vector<BlockSpace>& spaces);

/// Splits `total` samples across blocks proportionally to N_K (at least 1 and
/// at most N_K each; largest-remainder rounding).
std::map<BlockId, std::uint64_t> allocate_proportional(const PerBlock<std::uint64_t>& populations, std::uint64_t total);

/// K_block = ceil(fraction * N_K), at least 1.
std::map<BlockId, std::uint64_t> allocate_fraction(const PerBlock<std::uint64_t>& populations, double fraction);

/// Per block, K distinct sites drawn uniformly without replacement from the
/// block's grid, returned in canonical block order and ascending site index.
/// Deterministic in plan.seed.
std::vector<npu::FaultSite> draw_samples(const SamplingPlan& plan, const std::vector<BlockSpace>& spaces);

/// Same draw as draw_samples, as flat indices per space.
std::vector<std::vector<std::uint64_t>> draw_indices(const SamplingPlan& plan, const std::vector<BlockSpace>& spaces);

} // namespace sdcnpu::campaign
