#pragma once

#include "sdcnpu/blocks.hpp"
#include "sdcnpu/npu/model.hpp"
#include "sdcnpu/npu/workload.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace sdcnpu::npu
{

/// One injectable bit: register `reg` of `block`, bit `bit`, flipped after the
/// sequential update of `cycle` (cycles count per inference, from 0).
struct FaultSite
{
    BlockId block = BlockId::AO;
    std::string reg;
    std::uint32_t bit = 0;
    std::uint64_t cycle = 0;

    friend bool operator==(const FaultSite&, const FaultSite&) = default;
};

enum class OutcomeKind : std::uint8_t
{
    Masked,
    SDC,
    Crash,
};

enum class CrashReason : std::uint8_t
{
    Watchdog,
    InvalidAccess,
    IllegalState,
};

std::string_view outcome_name(OutcomeKind k) noexcept;
std::string_view crash_reason_name(CrashReason r) noexcept;
std::optional<OutcomeKind> parse_outcome(std::string_view s) noexcept;
std::optional<CrashReason> parse_crash_reason(std::string_view s) noexcept;

/// Classification of one injected run against the golden run. `sdc_fraction`
/// is the share of workload inputs whose top-1 label changed; it is zero for
/// Masked and Crash.
struct InjectionOutcome
{
    OutcomeKind kind = OutcomeKind::Masked;
    double sdc_fraction = 0.0;
    std::optional<CrashReason> crash_reason;
    /// Digest of the final architectural state over all inputs (0 on Crash).
    std::uint64_t state_digest = 0;
};

class GoldenTrace;

struct GoldenResult
{
    std::vector<std::uint32_t> top1_labels;
    std::uint64_t cycle_count = 0; ///< cycles per inference (identical for every input)
    std::uint64_t state_digest = 0;
    std::shared_ptr<const GoldenTrace> trace;
};

struct GoldenOptions
{
    /// Upper bound on memory spent on per-cycle state checkpoints; the
    /// checkpoint interval grows to fit.
    std::size_t checkpoint_budget_bytes = std::size_t{64} << 20;
};

/// Fault-free execution of `workload` on `model`. Throws ShapeError on a
/// workload/model mismatch and ConfigError if the workload does not fit the buffer.
GoldenResult run_golden(const NpuModel& model, const Workload& workload, const GoldenOptions& options = {});

/// Executes `workload` with a single bit flip at `site` (or with injection
/// disabled when `site` is empty) and classifies the result against `golden`.
/// Throws DomainError if the site lies outside the enumerated fault space.
InjectionOutcome run_injected(const NpuModel& model, const Workload& workload, const std::optional<FaultSite>& site,
                              const GoldenResult& golden);

/// N_K per block: block flop bits times golden cycle count.
PerBlock<std::uint64_t> enumerate_fault_sites(const NpuModel& model, const GoldenResult& golden);

/// Maps a flat index within block `b`'s fault space to a site.
/// Index layout: cycle * block_bits + bit offset (registers in inventory order).
FaultSite site_from_index(const NpuModel& model, BlockId b, std::uint64_t index);

} // namespace sdcnpu::npu
