#include "distill/preprocess.hpp"

#include <algorithm>
#include <cmath>

namespace distill {

WindowBatch window(const TimeSeriesDataset& series, std::size_t T, std::size_t stride) {
    const std::size_t L = series.length();
    const std::size_t D = series.channels();
    if (T == 0) throw UsageError("window length must be >= 1");
    if (stride == 0) throw UsageError("window stride must be >= 1");
    if (T > L) throw DataError("window longer than series");

    WindowBatch batch;
    batch.stride = stride;
    for (std::size_t s = 0; s + T <= L; s += stride) {
        Matrix w(D, T);
        for (std::size_t c = 0; c < D; ++c)
            std::copy_n(series.values.row(c) + s, T, w.row(c));
        batch.windows.push_back(std::move(w));
        batch.starts.push_back(s);
    }
    if (series.labels) {
        const auto& pts = *series.labels;
        std::vector<std::uint8_t> wl;
        wl.reserve(batch.starts.size());
        for (auto s : batch.starts) {
            const bool any = std::any_of(pts.begin() + s, pts.begin() + s + T,
                                         [](std::uint8_t v) { return v != 0; });
            wl.push_back(any ? 1 : 0);
        }
        batch.labels = std::move(wl);
    }
    return batch;
}

std::pair<Matrix, NormStats> instance_normalize(const Matrix& window) {
    NormStats stats;
    stats.mean.resize(window.rows);
    stats.std.resize(window.rows);
    Matrix out(window.rows, window.cols);
    for (std::size_t c = 0; c < window.rows; ++c) {
        const float* x = window.row(c);
        double sum = 0.0;
        for (std::size_t t = 0; t < window.cols; ++t) sum += x[t];
        const double mean = sum / static_cast<double>(window.cols);
        double sq = 0.0;
        for (std::size_t t = 0; t < window.cols; ++t) {
            const double d = x[t] - mean;
            sq += d * d;
        }
        const double sd = std::max(std::sqrt(sq / static_cast<double>(window.cols)), static_cast<double>(kStdEpsilon));
        stats.mean[c] = static_cast<float>(mean);
        stats.std[c] = std::max(static_cast<float>(sd), kStdEpsilon);
        for (std::size_t t = 0; t < window.cols; ++t) out(c, t) = static_cast<float>((x[t] - mean) / sd);
    }
    return {std::move(out), stats};
}

Matrix normalize_with(const Matrix& window, const NormStats& stats) {
    if (stats.mean.size() != window.rows || stats.std.size() != window.rows)
        throw UsageError("normalize_with: stats channel count does not match window");
    Matrix out(window.rows, window.cols);
    for (std::size_t c = 0; c < window.rows; ++c) {
        const float m = stats.mean[c];
        const float s = stats.std[c];
        for (std::size_t t = 0; t < window.cols; ++t) out(c, t) = (window(c, t) - m) / s;
    }
    return out;
}

Matrix denormalize(const Matrix& normalized, const NormStats& stats) {
    Matrix out(normalized.rows, normalized.cols);
    for (std::size_t c = 0; c < normalized.rows; ++c)
        for (std::size_t t = 0; t < normalized.cols; ++t)
            out(c, t) = normalized(c, t) * stats.std[c] + stats.mean[c];
    return out;
}

std::size_t patch_count(std::size_t T, std::size_t P, std::size_t patch_stride) {
    if (P == 0 || patch_stride == 0) throw UsageError("patch size and stride must be >= 1");
    if (P > T) throw UsageError("patch size " + std::to_string(P) + " exceeds window length " +
                                std::to_string(T));
    return (T - P) / patch_stride + 1;
}

PatchSequence patch(const Matrix& window, std::size_t P, std::size_t patch_stride) {
    const std::size_t n = patch_count(window.cols, P, patch_stride);
    PatchSequence seq;
    seq.count = n;
    seq.patches.reserve(window.rows);
    for (std::size_t c = 0; c < window.rows; ++c) {
        Matrix m(n, P);
        for (std::size_t i = 0; i < n; ++i)
            std::copy_n(window.row(c) + i * patch_stride, P, m.row(i));
        seq.patches.push_back(std::move(m));
    }
    return seq;
}

}  // namespace distill
