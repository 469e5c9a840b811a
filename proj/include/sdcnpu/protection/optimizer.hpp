#pragma once

#include "sdcnpu/protection/schemes.hpp"
#include "sdcnpu/reliability/model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sdcnpu::protection
{

/// One protectable block: its Monte Carlo SDC mass, raw FIT terms and area.
struct BlockProfile
{
    std::string name;
    double sdc_sites = 0.0; ///< (N/K) * sum of sampled SDC_i
    FitTerms fit;
    BlockArea area;
};

/// Scheme index (into ProtectionProblem::schemes) per block, in block order.
using Assignment = std::vector<std::uint8_t>;

inline constexpr std::uint64_t kDefaultDesignSpaceCap = 1'000'000;

struct ProtectionProblem
{
    std::vector<BlockProfile> blocks;
    std::vector<Scheme> schemes = default_schemes();
    double freq_hz = 1e9;
    bool logic_faults = false;
    double delta_pct = 0.0;
    double fixed_area = 0.0; ///< area outside the protectable blocks (e.g. the shared buffer)
    std::optional<reliability::AsilTarget> target;
    std::uint64_t design_space_cap = kDefaultDesignSpaceCap;
};

struct EvaluatedConfig
{
    Assignment assignment;
    double total_area = 0.0;
    double area_overhead_pct = 0.0;
    double sdc_npu = 0.0;
    bool meets_target = false;
};

/// Baseline per-site probability of `block` (FIT + alpha when logic faults are on).
double block_probability(const ProtectionProblem& problem, const BlockProfile& block);

double baseline_area(const ProtectionProblem& problem);

struct AreaSummary
{
    double total_area;
    double area_overhead_pct;
};

/// Area of `assignment`: baseline plus per-block scheme additions (DMR adds
/// (100 + delta)% of the block, hardening its overhead on the sequential share).
AreaSummary config_area(const ProtectionProblem& problem, const Assignment& assignment);

/// Throws DomainError if the assignment does not match the problem.
EvaluatedConfig evaluate(const ProtectionProblem& problem, const Assignment& assignment);

/// All scheme_count^block_count assignments in lexicographic order.
/// Throws CapacityError above `cap`.
std::vector<Assignment> enumerate_design_space(std::size_t block_count, std::size_t scheme_count,
                                               std::uint64_t cap = kDefaultDesignSpaceCap);

/// Points not dominated in (area, sdc), sorted by area ascending (ties by sdc,
/// then assignment). Exact duplicates of a frontier point are kept.
/// Throws DomainError on empty input.
std::vector<EvaluatedConfig> pareto_frontier(std::vector<EvaluatedConfig> points);

struct OptimizeResult
{
    std::optional<EvaluatedConfig> best; ///< empty when infeasible
    std::vector<EvaluatedConfig> frontier;
};

/// Minimum sdc_npu with total_area <= budget; ties go to the smaller area, then
/// the lexicographically smaller code vector.
OptimizeResult optimize(const ProtectionProblem& problem, double area_budget);

/// Minimum-area assignment meeting problem.target; ties go to the smaller
/// sdc_npu, then the lexicographically smaller code vector.
OptimizeResult min_area(const ProtectionProblem& problem);

/// Scheme codes (0 none, 1 hardening, 2 DMR, 3 SET-tolerant hardening).
std::vector<int> assignment_codes(const ProtectionProblem& problem, const Assignment& assignment);

} // namespace sdcnpu::protection
