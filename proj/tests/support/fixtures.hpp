#pragma once

#include "sdcnpu/npu/workload.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>

namespace sdcnpu::testing
{

inline std::filesystem::path source_dir() { return SDCNPU_SOURCE_DIR; }
inline std::filesystem::path config_path(const std::string& name) { return source_dir() / "configs" / name; }

inline npu::Workload tiny_cnn() { return npu::load_workload(config_path("workloads/tiny-cnn.json")); }
inline npu::Workload toy_dense() { return npu::load_workload(config_path("workloads/toy-dense.json")); }

/// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name)
{
    const auto p = std::filesystem::path(SDCNPU_BINARY_DIR) / "scratch" / name;
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace sdcnpu::testing
