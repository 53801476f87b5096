// Synthetic anomalies: one randomly chosen perturbation on one random segment.
#pragma once

#include <vector>

#include "distill/core.hpp"

namespace distill {

struct Segment {
    std::size_t start = 0;
    std::size_t end = 0;  // exclusive
};

struct Augmented {
    Matrix window;
    Segment segment;
    AugmentKind kind = AugmentKind::jitter;
};

// Requires T >= 4. Everything outside the returned segment is a bit-exact copy.
Augmented augment(const Matrix& window, const AugmentSpec& spec, Rng& rng);

// Primitives, applied to every channel on [seg.start, seg.end).
void apply_jitter(Matrix& window, Segment seg, double sigma, Rng& rng);
void apply_scale(Matrix& window, Segment seg, double factor);
void apply_warp(Matrix& window, Segment seg, const std::vector<double>& knot_speeds);

// Position of output sample j in the source segment for the given knot speeds:
// integrated piecewise-constant speed, rescaled so 0 -> 0 and len-1 -> len-1.
std::vector<double> warp_positions(std::size_t len, const std::vector<double>& knot_speeds);

}  // namespace distill
