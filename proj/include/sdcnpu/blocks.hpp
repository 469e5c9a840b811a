#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace sdcnpu
{

/// Fault-injectable functional blocks of the NPU. The enumerator order is the
/// canonical block order used everywhere (assignment vectors, reports, logs):
/// [AO, DMA, MAC, REG, TSU, WD].
enum class BlockId : std::uint8_t
{
    AO,  ///< activation output unit
    DMA, ///< activation fetch
    MAC, ///< multiply-accumulate array
    REG, ///< layer configuration registers
    TSU, ///< traversal / sequencing unit
    WD,  ///< weight decoder
};

inline constexpr std::size_t kBlockCount = 6;

inline constexpr std::array<BlockId, kBlockCount> kAllBlocks = {
    BlockId::AO, BlockId::DMA, BlockId::MAC, BlockId::REG, BlockId::TSU, BlockId::WD};

constexpr std::size_t index_of(BlockId b) noexcept { return static_cast<std::size_t>(b); }

constexpr std::string_view block_name(BlockId b) noexcept
{
    constexpr std::array<std::string_view, kBlockCount> names = {"AO", "DMA", "MAC", "REG", "TSU", "WD"};
    return names[index_of(b)];
}

constexpr std::optional<BlockId> parse_block(std::string_view s) noexcept
{
    for (BlockId b : kAllBlocks)
        if (block_name(b) == s)
            return b;
    return std::nullopt;
}

/// Fixed-size per-block table indexed by BlockId.
template <typename T>
using PerBlock = std::array<T, kBlockCount>;

} // namespace sdcnpu
