#include "sdcnpu/npu/model.hpp"

#include "sdcnpu/error.hpp"

#include <fmt/format.h>

#include <cmath>
#include <set>

namespace sdcnpu::npu
{

namespace
{

struct Builder
{
    const NpuConfig& config;
    std::vector<RegisterSpec> regs;
    std::set<std::string> used_overrides;

    std::size_t add(BlockId block, std::string name, std::uint32_t default_width, const std::string& override_key)
    {
        std::uint32_t width = default_width;
        if (auto it = config.register_widths.find(override_key); it != config.register_widths.end())
        {
            width = it->second;
            used_overrides.insert(override_key);
        }
        if (width == 0 || width > 32)
            throw ConfigError("npu.register_widths." + override_key, "width must be in [1, 32]");
        regs.push_back({block, std::move(name), width});
        return regs.size() - 1;
    }

    std::size_t add(BlockId block, const std::string& name, std::uint32_t default_width)
    {
        return add(block, name, default_width, std::string(block_name(block)) + "." + name);
    }
};

} // namespace

std::size_t NpuModel::find(BlockId b, std::string_view name) const noexcept
{
    for (std::size_t idx : by_block_[index_of(b)])
        if (registers_[idx].name == name)
            return idx;
    return npos;
}

NpuModel build_npu(const NpuConfig& config)
{
    if (config.mac_rows == 0)
        throw ConfigError("npu.mac_rows", "must be positive");
    if (config.mac_cols == 0)
        throw ConfigError("npu.mac_cols", "must be positive");
    if (config.mac_rows > kMaxMacDim)
        throw ConfigError("npu.mac_rows", fmt::format("at most {} rows (one DMA latch byte per row)", kMaxMacDim));
    if (config.mac_cols > kMaxMacDim)
        throw ConfigError("npu.mac_cols", fmt::format("at most {} columns (one WD decode byte per column)", kMaxMacDim));
    if (!(config.watchdog_factor > 1.0) || !std::isfinite(config.watchdog_factor))
        throw ConfigError("npu.watchdog_factor", "must be a finite value > 1");
    // One tile needs at least a weight word per reduction step and an output
    // byte per cell; anything below that cannot hold any workload.
    const std::uint32_t min_buffer = 4 * config.mac_cols + config.mac_rows * config.mac_cols;
    if (config.buffer_bytes < min_buffer)
        throw ConfigError("npu.buffer_bytes", fmt::format("must be at least {} bytes for a {}x{} array", min_buffer,
                                                          config.mac_rows, config.mac_cols));
    if (config.buffer_bytes > kMaxBufferBytes)
        throw ConfigError("npu.buffer_bytes", fmt::format("must be at most {} (16-bit weight pointer)", kMaxBufferBytes));

    Builder b{config, {}, {}};
    RegisterMap m{};

    m.ao_act_in = b.add(BlockId::AO, "act_in", 32);
    m.ao_bias = b.add(BlockId::AO, "bias", 32);
    m.ao_act_out = b.add(BlockId::AO, "act_out", 8);

    m.dma_src_addr = b.add(BlockId::DMA, "src_addr", 32);
    m.dma_dst_addr = b.add(BlockId::DMA, "dst_addr", 32);
    m.dma_burst_cnt = b.add(BlockId::DMA, "burst_cnt", 16);
    m.dma_data_latch = b.add(BlockId::DMA, "data_latch", 32);

    m.mac_base = b.regs.size();
    for (std::uint32_t r = 0; r < config.mac_rows; ++r)
        for (std::uint32_t c = 0; c < config.mac_cols; ++c)
        {
            const std::string cell = fmt::format("[{}][{}]", r, c);
            b.add(BlockId::MAC, "acc" + cell, 32, "MAC.acc");
            b.add(BlockId::MAC, "a_latch" + cell, 8, "MAC.a_latch");
            b.add(BlockId::MAC, "w_latch" + cell, 8, "MAC.w_latch");
        }

    m.reg_base = b.regs.size();
    for (std::size_t i = 0; i < kLayerConfigRegisters; ++i)
        b.add(BlockId::REG, fmt::format("cfg{}", i), 32);

    m.tsu_row_cnt = b.add(BlockId::TSU, "row_cnt", 16);
    m.tsu_col_cnt = b.add(BlockId::TSU, "col_cnt", 16);
    m.tsu_chan_cnt = b.add(BlockId::TSU, "chan_cnt", 16);
    m.tsu_fsm_state = b.add(BlockId::TSU, "fsm_state", 8);

    m.wd_wbuf_ptr = b.add(BlockId::WD, "wbuf_ptr", 16);
    m.wd_decode_shift = b.add(BlockId::WD, "decode_shift", 32);
    m.wd_weight_latch = b.add(BlockId::WD, "weight_latch", 8);

    for (const auto& [key, width] : config.register_widths)
        if (!b.used_overrides.contains(key))
            throw ConfigError("npu.register_widths." + key, "unknown register");

    NpuModel model;
    model.config_ = config;
    model.registers_ = std::move(b.regs);
    model.map_ = m;
    for (std::size_t i = 0; i < model.registers_.size(); ++i)
    {
        const auto& spec = model.registers_[i];
        model.by_block_[index_of(spec.block)].push_back(i);
        model.block_bits_[index_of(spec.block)] += spec.width_bits;
    }
    return model;
}

} // namespace sdcnpu::npu
