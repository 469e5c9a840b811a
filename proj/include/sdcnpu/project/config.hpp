#pragma once

#include "sdcnpu/blocks.hpp"
#include "sdcnpu/npu/model.hpp"
#include "sdcnpu/npu/workload.hpp"
#include "sdcnpu/protection/optimizer.hpp"
#include "sdcnpu/reliability/model.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sdcnpu::project
{

/// Source of the logic-fault FIT increase alpha.
enum class AlphaSource
{
    Fanin, ///< latch-relative upper bound from fan-in and depth
    Flux,  ///< flux times sensitive cross section
};

struct LogicFaultConfig
{
    bool enabled = false;
    AlphaSource source = AlphaSource::Fanin;
    reliability::LogicFaultParams params;
    /// Per-block fan-in overrides for the fan-in source.
    std::map<BlockId, double> fanin;
};

enum class Allocation
{
    Proportional, ///< sample_size(total N) split by N_K
    Fraction,     ///< ceil(fraction * N_K) per block
    Explicit,     ///< counts given per block
};

struct SamplingConfig
{
    std::uint64_t seed = 1;
    double margin = 0.01;
    double confidence = 0.99;
    double p = 0.5;
    Allocation allocation = Allocation::Proportional;
    double fraction = 0.1;
    std::map<BlockId, std::uint64_t> counts;
    std::map<BlockId, std::vector<std::string>> registers;
    std::vector<BlockId> blocks{kAllBlocks.begin(), kAllBlocks.end()};
};

enum class AsilSource
{
    Published, ///< published ASIL-D table, scaled by SoC budget for B/C
    Derived,   ///< budget * area_fraction * inference_time / (1e9 * 3600)
};

struct AsilConfig
{
    reliability::AsilLevel level = reliability::AsilLevel::D;
    AsilSource source = AsilSource::Published;
    std::optional<double> area_fraction;    ///< derived source; defaults to the published row
    std::optional<double> inference_time_s; ///< derived source; defaults to 0.3 ms
};

struct ProjectConfig
{
    std::filesystem::path path; ///< config file, empty for in-memory configs
    npu::NpuConfig npu;
    npu::Workload workload;
    reliability::TechNode tech;
    double freq_ghz = 1.0; ///< clock used for per-cycle upset probability
    LogicFaultConfig logic;
    std::vector<protection::Scheme> schemes;
    PerBlock<protection::BlockArea> areas{};
    double fixed_area = 0.0;
    std::string mac_config = "MAC-32";
    std::optional<double> delta_pct; ///< checker overhead; looked up by node and MAC config when absent
    std::uint64_t design_space_cap = protection::kDefaultDesignSpaceCap;
    SamplingConfig sampling;
    AsilConfig asil;
};

/// Parses a project document. `base_dir` resolves a relative workload path.
/// Throws ConfigError naming the key path of the first bad value.
ProjectConfig parse_project(const nlohmann::json& doc, const std::filesystem::path& base_dir);

/// Reads and parses a project file. Throws IoError if unreadable.
ProjectConfig load_project(const std::filesystem::path& path);

/// Replaces the technology node by a built-in preset ("16nm" / "7nm").
void select_node(ProjectConfig& config, const std::string& name);

/// Checker overhead for DMR. Throws ConfigError("protection.delta_pct") when
/// neither configured nor tabulated for (node, MAC config).
double resolve_delta(const ProjectConfig& config);

/// ASIL target from the configured source, at `level`.
reliability::AsilTarget resolve_target(const ProjectConfig& config, reliability::AsilLevel level);

/// Per-cycle upset probability of one flop bit, optionally with logic faults.
double block_probability(const ProjectConfig& config, BlockId block, bool logic_faults);

/// Raw flop FIT and logic-fault alpha (FIT/MB) of `block`.
protection::FitTerms block_fit(const ProjectConfig& config, BlockId block);

} // namespace sdcnpu::project
