#include "sdcnpu/npu/workload.hpp"

#include "sdcnpu/error.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <fstream>
#include <random>

namespace sdcnpu::npu
{

namespace
{

// Field widths of the layer-config registers.
constexpr std::uint32_t kMaxSpatial = 255;
constexpr std::uint32_t kMaxChannels = 0xFFFF;
constexpr std::uint32_t kMaxReduction = 0xFFFF;
constexpr std::uint32_t kMaxShift = 31;

bool is_compute(LayerKind k) { return k == LayerKind::Dense || k == LayerKind::Conv3x3; }

/// Uniform integer in [lo, hi] from the raw engine output, so generated
/// workloads do not depend on the standard library's distribution algorithms.
std::int64_t draw(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi)
{
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(rng() % span);
}

LayerKind parse_kind(const std::string& s, std::size_t i)
{
    if (s == "dense")
        return LayerKind::Dense;
    if (s == "conv3x3")
        return LayerKind::Conv3x3;
    if (s == "relu")
        return LayerKind::Relu;
    if (s == "argmax" || s == "argmax-head")
        return LayerKind::ArgmaxHead;
    throw ConfigError(fmt::format("layers[{}].type", i), "unknown layer type '" + s + "'");
}

template <typename T>
std::vector<T> int_array(const nlohmann::json& j, const std::string& field, std::int64_t lo, std::int64_t hi)
{
    if (!j.is_array())
        throw ConfigError(field, "expected an array of integers");
    std::vector<T> out;
    out.reserve(j.size());
    for (const auto& v : j)
    {
        if (!v.is_number_integer())
            throw ConfigError(field, "expected an array of integers");
        const auto x = v.get<std::int64_t>();
        if (x < lo || x > hi)
            throw ConfigError(field, fmt::format("value {} outside [{}, {}]", x, lo, hi));
        out.push_back(static_cast<T>(x));
    }
    return out;
}

} // namespace

std::vector<LayerPlan> plan_layers(const Workload& wl)
{
    if (wl.input_shape.size() == 0)
        throw ShapeError("input shape has zero elements");
    if (wl.layers.empty())
        throw ShapeError("workload has no layers");
    if (wl.layers.back().kind != LayerKind::ArgmaxHead)
        throw ShapeError("last layer must be the argmax head");

    std::vector<LayerPlan> plans;
    Shape cur = wl.input_shape;
    for (std::size_t i = 0; i < wl.layers.size(); ++i)
    {
        const Layer& l = wl.layers[i];
        switch (l.kind)
        {
        case LayerKind::Relu:
            if (plans.empty() || plans.back().layer_index + 1 != i)
                throw ShapeError(fmt::format("layer {}: relu must directly follow a dense or conv3x3 layer", i));
            plans.back().relu = true;
            continue;
        case LayerKind::ArgmaxHead:
            if (i + 1 != wl.layers.size())
                throw ShapeError(fmt::format("layer {}: argmax head must be the last layer", i));
            if (plans.empty())
                throw ShapeError("workload has no dense or conv3x3 layer");
            continue;
        case LayerKind::Dense:
        case LayerKind::Conv3x3:
            break;
        }

        LayerPlan p{i, l.kind, cur, {}, false, l.shift, 0};
        if (l.out == 0 || l.out > kMaxChannels)
            throw ShapeError(fmt::format("layer {}: output width must be in [1, {}]", i, kMaxChannels));
        if (l.shift > kMaxShift)
            throw ShapeError(fmt::format("layer {}: shift must be at most {}", i, kMaxShift));
        if (l.kind == LayerKind::Conv3x3)
        {
            if (cur.h < 3 || cur.w < 3)
                throw ShapeError(fmt::format("layer {}: conv3x3 needs spatial input of at least 3x3, got {}x{}", i,
                                             cur.h, cur.w));
            p.in = cur;
            p.out = {cur.h - 2, cur.w - 2, l.out};
            p.reduction = 9 * cur.c;
        }
        else
        {
            p.in = {1, 1, static_cast<std::uint32_t>(cur.size())};
            p.out = {1, 1, l.out};
            p.reduction = p.in.c;
        }
        if (p.in.h > kMaxSpatial || p.in.w > kMaxSpatial)
            throw ShapeError(fmt::format("layer {}: spatial size exceeds {}", i, kMaxSpatial));
        if (p.in.c > kMaxChannels)
            throw ShapeError(fmt::format("layer {}: input width exceeds {}", i, kMaxChannels));
        if (p.reduction > kMaxReduction)
            throw ShapeError(fmt::format("layer {}: reduction length {} exceeds {}", i, p.reduction, kMaxReduction));
        if (l.weights.size() != std::size_t{l.out} * p.reduction)
            throw ShapeError(fmt::format("layer {}: expected {} weights, got {}", i, std::size_t{l.out} * p.reduction,
                                         l.weights.size()));
        if (l.bias.size() != l.out)
            throw ShapeError(fmt::format("layer {}: expected {} biases, got {}", i, l.out, l.bias.size()));
        cur = p.out;
        plans.push_back(p);
    }

    if (wl.inputs.empty())
        throw ShapeError("workload has no inputs");
    for (std::size_t i = 0; i < wl.inputs.size(); ++i)
        if (wl.inputs[i].size() != wl.input_shape.size())
            throw ShapeError(fmt::format("input {}: expected {} values, got {}", i, wl.input_shape.size(),
                                         wl.inputs[i].size()));
    return plans;
}

Workload parse_workload(const nlohmann::json& doc)
{
    Workload wl;
    try
    {
        wl.name = doc.value("name", std::string("workload"));
        wl.seed = doc.value("seed", std::uint64_t{0});
        const auto shape = int_array<std::uint32_t>(doc.at("input_shape"), "input_shape", 1, kMaxSpatial * kMaxSpatial);
        if (shape.size() != 3)
            throw ConfigError("input_shape", "expected [h, w, c]");
        wl.input_shape = {shape[0], shape[1], shape[2]};

        const auto weight_range = doc.value("weight_range", std::int64_t{16});
        const auto bias_range = doc.value("bias_range", std::int64_t{64});
        const auto input_lo = doc.value("input_min", std::int64_t{-128});
        const auto input_hi = doc.value("input_max", std::int64_t{127});
        if (weight_range < 0 || weight_range > 127)
            throw ConfigError("weight_range", "must be in [0, 127]");
        if (input_lo < -128 || input_hi > 127 || input_lo > input_hi)
            throw ConfigError("input_min", "input range must lie in [-128, 127]");

        std::mt19937_64 rng(wl.seed);
        Shape cur = wl.input_shape;
        const auto& layers = doc.at("layers");
        for (std::size_t i = 0; i < layers.size(); ++i)
        {
            const auto& lj = layers[i];
            Layer l;
            l.kind = parse_kind(lj.at("type").get<std::string>(), i);
            if (is_compute(l.kind))
            {
                const std::string key = l.kind == LayerKind::Dense ? "out_features" : "out_channels";
                l.out = lj.at(key).get<std::uint32_t>();
                l.shift = lj.value("shift", std::uint32_t{0});
                const std::size_t k = l.kind == LayerKind::Dense ? cur.size() : std::size_t{9} * cur.c;
                const std::string prefix = fmt::format("layers[{}].", i);
                if (lj.contains("weights"))
                    l.weights = int_array<std::int8_t>(lj["weights"], prefix + "weights", -128, 127);
                else if (lj.contains("weight_fill"))
                    l.weights.assign(std::size_t{l.out} * k, lj["weight_fill"].get<std::int8_t>());
                else
                    for (std::size_t n = 0; n < std::size_t{l.out} * k; ++n)
                        l.weights.push_back(static_cast<std::int8_t>(draw(rng, -weight_range, weight_range)));
                if (lj.contains("bias"))
                    l.bias = int_array<std::int32_t>(lj["bias"], prefix + "bias", INT32_MIN, INT32_MAX);
                else if (lj.contains("bias_fill"))
                    l.bias.assign(l.out, lj["bias_fill"].get<std::int32_t>());
                else
                    for (std::uint32_t n = 0; n < l.out; ++n)
                        l.bias.push_back(static_cast<std::int32_t>(draw(rng, -bias_range, bias_range)));
                if (l.kind == LayerKind::Conv3x3 && cur.h >= 3 && cur.w >= 3)
                    cur = {cur.h - 2, cur.w - 2, l.out};
                else
                    cur = {1, 1, l.out};
            }
            wl.layers.push_back(std::move(l));
        }

        if (doc.contains("inputs"))
        {
            for (std::size_t i = 0; i < doc["inputs"].size(); ++i)
                wl.inputs.push_back(int_array<std::int8_t>(doc["inputs"][i], fmt::format("inputs[{}]", i), -128, 127));
        }
        else
        {
            const auto count = doc.value("num_inputs", std::size_t{1});
            for (std::size_t i = 0; i < count; ++i)
            {
                std::vector<std::int8_t> in;
                for (std::size_t n = 0; n < wl.input_shape.size(); ++n)
                    in.push_back(static_cast<std::int8_t>(draw(rng, input_lo, input_hi)));
                wl.inputs.push_back(std::move(in));
            }
        }
    }
    catch (const nlohmann::json::exception& e)
    {
        throw ConfigError("workload", e.what());
    }
    plan_layers(wl);
    return wl;
}

Workload load_workload(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open workload file " + path.string());
    nlohmann::json doc;
    try
    {
        doc = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
    }
    catch (const nlohmann::json::parse_error& e)
    {
        throw ConfigError("workload", path.string() + ": " + e.what());
    }
    return parse_workload(doc);
}

} // namespace sdcnpu::npu
