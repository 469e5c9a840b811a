#pragma once

#include "sdcnpu/campaign/campaign.hpp"
#include "sdcnpu/project/config.hpp"
#include "sdcnpu/protection/optimizer.hpp"

#include <atomic>
#include <iosfwd>
#include <string>
#include <vector>

namespace sdcnpu::cli
{

enum ExitCode : int
{
    kExitOk = 0,
    kExitUsage = 1, ///< bad arguments or configuration
    kExitIo = 2,
    kExitInfeasible = 3,
    kExitInterrupted = 4,
};

/// Sampling plan for `config` over the fault spaces of `golden`.
campaign::SamplingPlan build_plan(const project::ProjectConfig& config, const npu::NpuModel& model,
                                  const npu::GoldenResult& golden);

/// Protection problem over all six blocks; blocks absent from `stats`
/// contribute no SDC.
protection::ProtectionProblem build_problem(const project::ProjectConfig& config,
                                            const std::vector<campaign::BlockStats>& stats, bool logic_faults);

/// Frontier / result rows: total_area,area_overhead_pct,sdc_npu,meets_target,AO,DMA,MAC,REG,TSU,WD.
std::string format_configs_csv(const protection::ProtectionProblem& problem,
                               const std::vector<protection::EvaluatedConfig>& configs);

/// Entry point shared by the executable and the tests. `stop` is polled by
/// long-running commands.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const std::atomic<bool>* stop = nullptr);

} // namespace sdcnpu::cli
