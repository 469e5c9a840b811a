#pragma once

#include "sdcnpu/blocks.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace sdcnpu::npu
{

/// Desk-scale NPU parameters. Activations reach the array through the 32-bit
/// DMA fetch latch (one byte per row) and weights through the 32-bit WD decode
/// register (one byte per column), so both array dimensions are capped at 4.
struct NpuConfig
{
    std::uint32_t mac_rows = 2;
    std::uint32_t mac_cols = 2;
    std::uint32_t buffer_bytes = 16384;
    double watchdog_factor = 10.0;
    /// Width overrides keyed "BLOCK.name"; per-cell MAC registers use the base
    /// name ("MAC.acc"). Writes to a narrowed register are truncated.
    std::map<std::string, std::uint32_t> register_widths;
};

inline constexpr std::uint32_t kMaxMacDim = 4;
inline constexpr std::uint32_t kMaxBufferBytes = 1u << 16; // wbuf_ptr is 16 bits
inline constexpr std::size_t kLayerConfigRegisters = 8;

struct RegisterSpec
{
    BlockId block;
    std::string name;
    std::uint32_t width_bits;
};

/// Indices into the flat register file for every architecturally named register.
struct RegisterMap
{
    std::size_t dma_src_addr, dma_dst_addr, dma_burst_cnt, dma_data_latch;
    std::size_t tsu_row_cnt, tsu_col_cnt, tsu_chan_cnt, tsu_fsm_state;
    std::size_t reg_base; // 8 consecutive layer-config registers
    std::size_t wd_wbuf_ptr, wd_decode_shift, wd_weight_latch;
    std::size_t mac_base; // per cell: acc, a_latch, w_latch (row-major cells)
    std::size_t ao_act_in, ao_bias, ao_act_out;

    std::size_t acc(std::size_t cell) const noexcept { return mac_base + 3 * cell; }
    std::size_t a_latch(std::size_t cell) const noexcept { return mac_base + 3 * cell + 1; }
    std::size_t w_latch(std::size_t cell) const noexcept { return mac_base + 3 * cell + 2; }
    std::size_t cfg(std::size_t i) const noexcept { return reg_base + i; }
};

class NpuModel
{
  public:
    const NpuConfig& config() const noexcept { return config_; }
    const std::vector<RegisterSpec>& registers() const noexcept { return registers_; }
    const RegisterMap& map() const noexcept { return map_; }

    std::size_t cells() const noexcept { return std::size_t{config_.mac_rows} * config_.mac_cols; }

    /// Register-file indices belonging to `b`, in inventory order.
    const std::vector<std::size_t>& block_registers(BlockId b) const noexcept { return by_block_[index_of(b)]; }

    /// Flop bits in block `b` (sum of its register widths).
    std::uint64_t block_bits(BlockId b) const noexcept { return block_bits_[index_of(b)]; }

    /// Register-file index of (block, name), or npos.
    std::size_t find(BlockId b, std::string_view name) const noexcept;

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  private:
    friend NpuModel build_npu(const NpuConfig&);

    NpuConfig config_;
    std::vector<RegisterSpec> registers_;
    RegisterMap map_{};
    PerBlock<std::vector<std::size_t>> by_block_;
    PerBlock<std::uint64_t> block_bits_{};
};

/// Validates `config` and lays out the fixed register inventory.
/// Throws ConfigError naming the offending field.
NpuModel build_npu(const NpuConfig& config);

} // namespace sdcnpu::npu
