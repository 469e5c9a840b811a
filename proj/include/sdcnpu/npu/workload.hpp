#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace sdcnpu::npu
{

enum class LayerKind
{
    Dense,
    Conv3x3, ///< valid padding, stride 1
    Relu,    ///< fused into the preceding compute layer's output stage
    ArgmaxHead,
};

struct Shape
{
    std::uint32_t h = 1, w = 1, c = 1;

    std::size_t size() const noexcept { return std::size_t{h} * w * c; }
    friend bool operator==(const Shape&, const Shape&) = default;
};

/// Weights are row-major [out][k]. For conv3x3, k = (ky*3 + kx)*in_c + ci;
/// for dense, k indexes the flattened HWC input.
struct Layer
{
    LayerKind kind = LayerKind::Dense;
    std::uint32_t out = 0;   ///< out_features / out_channels (compute layers)
    std::uint32_t shift = 0; ///< requantization right-shift (compute layers)
    std::vector<std::int8_t> weights;
    std::vector<std::int32_t> bias;
};

struct Workload
{
    std::string name;
    std::uint64_t seed = 0;
    Shape input_shape;
    std::vector<Layer> layers;
    std::vector<std::vector<std::int8_t>> inputs;
};

/// Shape of every compute layer's output, in order; validates the whole chain.
/// Throws ShapeError when layers do not chain or violate register field limits.
struct LayerPlan
{
    std::size_t layer_index; ///< index into Workload::layers
    LayerKind kind;
    Shape in, out;
    bool relu;
    std::uint32_t shift;
    std::uint32_t reduction; ///< K: products per output
};
std::vector<LayerPlan> plan_layers(const Workload& workload);

/// Parses the workload JSON format (see README.md). Weights,
/// biases and inputs not given inline are drawn from `seed`.
Workload parse_workload(const nlohmann::json& doc);
Workload load_workload(const std::filesystem::path& path);

} // namespace sdcnpu::npu
