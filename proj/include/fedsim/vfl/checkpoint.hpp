#pragma once

#include <filesystem>
#include <vector>

#include "fedsim/nn/tensor.hpp"
#include "fedsim/vfl/model.hpp"

namespace fedsim::vfl {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary container, little-endian:
///   "FSIMCKPT" | u32 version | u32 set count
///   per set:   u32 name length | name | u32 parameter count
///   per param: u32 name length | name | u32 rank | u64 extents[rank] | f64 values
void write_checkpoint(const std::filesystem::path& path, const std::vector<const nn::ParamSet*>& sets);
std::vector<nn::ParamSet> read_checkpoint(const std::filesystem::path& path);

/// Copies stored values into the model; names and shapes must match exactly.
void load_checkpoint(const std::filesystem::path& path, ModelBundle& model);

}  // namespace fedsim::vfl
