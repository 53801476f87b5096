// Windowing, per-instance normalization and patching.
#pragma once

#include <vector>

#include "distill/core.hpp"

namespace distill {

inline constexpr float kStdEpsilon = 1e-5f;

struct NormStats {
    std::vector<float> mean;  // [D]
    std::vector<float> std;   // [D], already guarded by kStdEpsilon
};

// patches[c] is an [n x P] matrix of channel c.
struct PatchSequence {
    std::vector<Matrix> patches;
    std::size_t count = 0;
};

// Windows of length T starting at 0, stride, 2*stride, ... that fit entirely.
// Window labels are the OR of the covered point labels when the series has labels.
WindowBatch window(const TimeSeriesDataset& series, std::size_t T, std::size_t stride);

// Per channel z-score over the time axis, population std floored at kStdEpsilon.
std::pair<Matrix, NormStats> instance_normalize(const Matrix& window);

// Applies previously computed stats (typically from the paired input window).
Matrix normalize_with(const Matrix& window, const NormStats& stats);

// Inverse of normalize_with.
Matrix denormalize(const Matrix& normalized, const NormStats& stats);

std::size_t patch_count(std::size_t T, std::size_t P, std::size_t patch_stride);

// Contiguous slices; a tail shorter than P is dropped.
PatchSequence patch(const Matrix& window, std::size_t P, std::size_t patch_stride);

}  // namespace distill
