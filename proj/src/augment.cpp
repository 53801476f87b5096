#include "distill/augment.hpp"

#include <algorithm>
#include <cmath>

namespace distill {

void apply_jitter(Matrix& window, Segment seg, double sigma, Rng& rng) {
    for (std::size_t c = 0; c < window.rows; ++c) {
        const float* x = window.row(c);
        double mean = 0.0;
        for (std::size_t t = 0; t < window.cols; ++t) mean += x[t];
        mean /= static_cast<double>(window.cols);
        double var = 0.0;
        for (std::size_t t = 0; t < window.cols; ++t) var += (x[t] - mean) * (x[t] - mean);
        const double sd = std::max(std::sqrt(var / static_cast<double>(window.cols)), 1e-5);
        if (sigma == 0.0) continue;
        for (std::size_t t = seg.start; t < seg.end; ++t)
            window(c, t) = static_cast<float>(window(c, t) + rng.normal(0.0, sigma * sd));
    }
}

void apply_scale(Matrix& window, Segment seg, double factor) {
    const auto f = static_cast<float>(factor);
    for (std::size_t c = 0; c < window.rows; ++c)
        for (std::size_t t = seg.start; t < seg.end; ++t) window(c, t) *= f;
}

std::vector<double> warp_positions(std::size_t len, const std::vector<double>& knot_speeds) {
    std::vector<double> pos(len, 0.0);
    if (len < 2 || knot_speeds.empty()) {
        for (std::size_t j = 0; j < len; ++j) pos[j] = static_cast<double>(j);
        return pos;
    }
    const double K = static_cast<double>(knot_speeds.size());
    const double span = static_cast<double>(len - 1);
    // Cumulative time at step j, with the speed of the piece containing [j-1, j).
    for (std::size_t j = 1; j < len; ++j) {
        const double u = (static_cast<double>(j) - 0.5) / span;  // piece midpoint in [0,1)
        const auto k = std::min(static_cast<std::size_t>(u * K), knot_speeds.size() - 1);
        pos[j] = pos[j - 1] + knot_speeds[k];
    }
    const double total = pos[len - 1];
    for (std::size_t j = 1; j + 1 < len; ++j) pos[j] = pos[j] / total * span;
    pos[len - 1] = span;
    return pos;
}

void apply_warp(Matrix& window, Segment seg, const std::vector<double>& knot_speeds) {
    const std::size_t len = seg.end - seg.start;
    if (len < 2) return;
    const auto pos = warp_positions(len, knot_speeds);
    std::vector<float> src(len);
    for (std::size_t c = 0; c < window.rows; ++c) {
        std::copy_n(window.row(c) + seg.start, len, src.begin());
        for (std::size_t j = 0; j < len; ++j) {
            const double p = pos[j];
            const auto lo = std::min(static_cast<std::size_t>(std::floor(p)), len - 1);
            const std::size_t hi = std::min(lo + 1, len - 1);
            const double frac = p - static_cast<double>(lo);
            window(c, seg.start + j) = static_cast<float>(src[lo] * (1.0 - frac) + src[hi] * frac);
        }
    }
}

Augmented augment(const Matrix& window, const AugmentSpec& spec, Rng& rng) {
    const std::size_t T = window.cols;
    if (T < 4) throw UsageError("augment: window length must be >= 4");
    spec.validate();

    Augmented out;
    out.window = window;
    out.kind = spec.kinds[rng.uniform_index(0, spec.kinds.size() - 1)];

    const double frac = rng.uniform(spec.segment_fraction_min, spec.segment_fraction_max);
    const std::size_t len = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(frac * static_cast<double>(T))), 1, T);
    const std::size_t start = rng.uniform_index(0, T - len);
    out.segment = {start, start + len};

    switch (out.kind) {
        case AugmentKind::jitter:
            apply_jitter(out.window, out.segment, spec.jitter_sigma, rng);
            break;
        case AugmentKind::scale: {
            const bool low = rng.uniform() < 0.5;
            const double f = low ? rng.uniform(spec.scale_low_min, spec.scale_low_max)
                                 : rng.uniform(spec.scale_high_min, spec.scale_high_max);
            apply_scale(out.window, out.segment, f);
            break;
        }
        case AugmentKind::warp: {
            std::vector<double> speeds(spec.warp_knots);
            for (auto& s : speeds) s = rng.uniform(0.5, 2.0);
            apply_warp(out.window, out.segment, speeds);
            break;
        }
    }
    return out;
}

}  // namespace distill
