#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cvsdeblur/tensor.hpp"

namespace cvsdeblur {

// Named tensor as stored in a checkpoint file.
struct NamedTensor {
  std::string name;
  std::vector<std::int64_t> extents;
  std::vector<float> data;
};

// Checkpoint container, all fields little-endian:
//   header:  u32 version (=1), u32 tensor count
//   record:  u32 name length, name bytes, u32 rank, u64 extents[rank],
//            float32 payload in row-major order
// Writing the result of a load reproduces the original file byte for byte.

void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_checkpoint(const std::string& path);

// Conversion helpers between graph leaves and checkpoint records. Names must
// be set and unique; loading validates name/shape agreement and copies values
// into the existing parameter storage.
std::vector<NamedTensor> snapshot_params(const std::vector<nn::Tensor>& params);
void restore_params(const std::vector<NamedTensor>& tensors, std::vector<nn::Tensor>& params);

}  // namespace cvsdeblur
