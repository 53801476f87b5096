// Named-tensor container ("NTC1").
//
// Layout, little-endian:
//   [0, 8)        magic "NTC1\0\0\0\0"
//   [8, 16)       u64 header length H
//   [16, 16+H)    UTF-8 JSON: name -> {"dtype":"f32","shape":[...],"offset":int}
//   [16+H, ...)   payload, row-major f32; offsets relative to payload start
//
// Offsets are 8-byte aligned. The writer pads the header with spaces so the
// payload itself starts on an 8-byte boundary, and emits tensors in name order.
#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "distill/tensor.hpp"

namespace distill {

using TensorMap = std::map<std::string, Tensor>;

void write_container(const std::filesystem::path& path, const TensorMap& tensors);
std::string encode_container(const TensorMap& tensors);

// Throws DataError on bad magic, truncated payload or malformed header.
TensorMap read_container(const std::filesystem::path& path);
TensorMap decode_container(const std::string& bytes);

}  // namespace distill
